"""
One trial of the sluggish policy
================================

With probability gamma the policy revisits its choice of arm; otherwise it
keeps pulling the current arm.  It stops once the leading hypothesis clears
log(M - 1) + log L.  The trace records every decision.
"""

from pathlib import Path

import numpy as np

from seqbandit.harness import ExperimentConfig
from seqbandit.policy import run_trial

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

cfg = ExperimentConfig.load(CONFIGS / "odd_mean.json")
s, etas = cfg.structure(), cfg.true_natural

for gamma in (1.0, 0.2):
    pc = cfg.policy_config(log_L=3.0, gamma=gamma, beta=0.5)
    trace = []
    rec = run_trial(pc, s, etas, seed=11, trace=trace)
    arms = np.array([row["arm"] for row in trace if row["arm"] >= 0])
    print(f"gamma = {gamma}: tau = {rec.tau}, decision = {rec.delta}, cost = {rec.cost:.0f}, "
          f"switches = {rec.switches}, active steps = {rec.active_steps}")
    print("  pulls per arm:", np.bincount(arms, minlength=s.K))

# the last few rows of the gamma = 0.2 trace
print("\n   n  arm  U  leader  z_leader")
for row in trace[-5:]:
    print(f"{row['n']:4d} {row['arm']:4d} {str(row['U']):>2} {row['l_star']:6d} {row['z_star']:9.3f}")
