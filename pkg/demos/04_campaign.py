"""
A small Monte Carlo campaign
============================

Runs a reduced grid of the mean-shift config and prints the summary CSV next
to the lower bound log L / D*.  Use ``--trials`` to trade time for precision;
the shipped config uses 500.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

from seqbandit.harness import CSV_COLUMNS, ExperimentConfig, run_campaign

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

parser = argparse.ArgumentParser()
parser.add_argument("--trials", type=int, default=50)
parser.add_argument("--jobs", type=int, default=1)
args = parser.parse_args()

raw = json.loads((CONFIGS / "odd_mean.json").read_text())
raw["trials"] = args.trials
raw["grid"] = {"log_L": [0.0, 2.5, 5.0], "gamma": [0.2, 1.0], "beta": [0.5]}
cfg = ExperimentConfig.from_dict(raw)

cells = run_campaign(cfg, jobs=args.jobs)
out = csv.writer(sys.stdout, lineterminator="\n")
out.writerow(CSV_COLUMNS)
for c in cells:
    out.writerow([f"{v:.4g}" for v in c.csv_row()])

# delay per unit of log L against 1 / D*
d = cfg.oracle().d_star
by = {(c.logL, c.gamma): c for c in cells}
for g in (0.2, 1.0):
    slope = (by[(5.0, g)].mean_tau - by[(0.0, g)].mean_tau) / 5.0
    print(f"gamma = {g}: slope of E[tau] in log L ~ {slope:.1f}, 1 / D* = {1 / d:.1f}")
