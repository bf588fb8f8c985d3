"""Command line entry point: ``seqbandit {oracle,bound,run,trace}``.

Exit status is 0 on success, 1 on a usage or configuration error and 2 on a
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from .expfam import DomainError, ImproperPriorError
from .harness import (
    ConfigError, ExperimentConfig, emit_csv, lower_bound_curve, run_campaign, write_trace,
)
from .hypotheses import DegenerateWeightsError
from .oracle import NonConvergenceError
from .policy import run_trial

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _fmt_vec(v) -> str:
    return " ".join(repr(float(x)) for x in np.ravel(v))


def cmd_oracle(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    res = cfg.oracle()
    print(f"hypothesis: {cfg.true_hypothesis()}")
    print(f"lambda_star: {_fmt_vec(res.lam_star)}")
    print(f"d_star: {res.d_star!r}")
    print(f"certificate_gap: {res.certificate_gap!r}")
    print(f"method: {res.method}")
    return EXIT_OK


def cmd_bound(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.logL_max < 0:
        raise ConfigError("--logL-max must be non-negative")
    if args.step <= 0:
        raise ConfigError("--step must be positive")
    d = cfg.oracle().d_star
    rows = lower_bound_curve(d, args.logL_max, args.step)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["logL", "lower_bound"])
        for x, b in rows:
            w.writerow([repr(float(x)), repr(float(b))])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be >= 1")
        cfg.trials = args.trials
    out_dir = Path(args.out)
    summaries = run_campaign(cfg, jobs=args.jobs)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / Path(cfg.output).name
    emit_csv(summaries, path)
    if cfg.trace:
        for log_L, gamma, beta in cfg.cells():
            rows = []
            run_trial(cfg.policy_config(log_L, gamma, beta), cfg.structure(), cfg.true_natural,
                      np.random.SeedSequence(cfg.master_seed, spawn_key=(0,)), trace=rows)
            write_trace(rows, out_dir / f"{path.stem}_trace_{log_L:g}_{gamma:g}_{beta:g}.csv", cfg.structure().M)
    failed = [s for s in summaries if s.error]
    for s in failed:
        print(f"cell logL={s.logL} gamma={s.gamma} beta={s.beta} failed: {s.error}", file=sys.stderr)
    print(f"wrote {path}")
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_trace(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    beta = cfg.beta[0] if args.beta is None else args.beta
    pc = cfg.policy_config(args.logL, args.gamma, beta)
    rows = []
    rec = run_trial(pc, cfg.structure(), cfg.true_natural, args.seed, trace=rows)
    if args.out:
        write_trace(rows, args.out, cfg.structure().M)
    else:
        write_trace(rows, sys.stdout, cfg.structure().M)
    print(f"tau={rec.tau} delta={rec.delta} cost={rec.cost!r} switches={rec.switches} "
          f"correct={rec.correct} censored={rec.censored}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="seqbandit", description="Sequential multi-hypothesis testing on bandit arms with switching costs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    o = sub.add_parser("oracle", help="print lambda*, D* and the certificate gap")
    o.add_argument("--config", required=True)
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bound", help="lower-bound curve logL / D* as CSV")
    b.add_argument("--config", required=True)
    b.add_argument("--logL-max", dest="logL_max", type=float, required=True)
    b.add_argument("--step", type=float, default=0.5)
    b.add_argument("--out", help="CSV path (default stdout)")
    b.set_defaults(func=cmd_bound)

    r = sub.add_parser("run", help="run the Monte Carlo campaign and write its CSV")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--trials", type=int, help="override the trial count")
    r.add_argument("--jobs", type=int, help="worker processes (default: $SEQBANDIT_JOBS or 1)")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("trace", help="per-step trace of a single trial")
    t.add_argument("--config", required=True)
    t.add_argument("--logL", type=float, required=True)
    t.add_argument("--gamma", type=float, required=True)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--beta", type=float)
    t.add_argument("--out", help="CSV path (default stdout)")
    t.set_defaults(func=cmd_trace)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, ImproperPriorError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        if isinstance(exc, (DomainError, DegenerateWeightsError)):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
