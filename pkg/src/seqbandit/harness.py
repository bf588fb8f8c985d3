"""Monte Carlo campaigns over (log L, gamma, beta) grids.

A campaign is described by a JSON file, for example::

    {
      "name": "odd_mean",
      "structure": {"kind": "odd_arm", "K": 8,
                    "family": "gaussian_known_variance", "family_params": {"sigma2": 1.0}},
      "true_expectation": [[0.0], [1.0], [1.0], [1.0], [1.0], [1.0], [1.0], [1.0]],
      "grid": {"log_L": [0, 1, 2, 3, 4, 5], "gamma": [1.0], "beta": [0.5]},
      "trials": 500,
      "master_seed": 2024,
      "output": "odd_mean.csv",
      "trace": false
    }

Exactly one of ``true_expectation`` / ``true_natural`` gives the arm
parameters.  Optional keys: ``switch_cost`` (K x K, default 1 off the
diagonal), ``prior`` (``{"n0": 1.0, "kappa_ref": [...]}``), ``max_steps``
and ``structure.c`` (best-arm direction).

Trial t of every cell uses the seed ``SeedSequence(master_seed,
spawn_key=(t,))``, so cells share random numbers and results do not depend
on how work is split across processes.  ``SEQBANDIT_JOBS`` sets the number
of worker processes (default 1).
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .expfam import DomainError, ImproperPriorError, make_family
from .glr import PosteriorState
from .hypotheses import HypothesisStructure, make_structure
from .oracle import NonConvergenceError, OracleResult, asymptotic_lower_bound, optimal_weights
from .policy import PolicyConfig, horizon_cap, run_trial, summarize_censoring

CSV_COLUMNS = ["logL", "gamma", "beta", "mean_tau", "se_tau", "mean_cost", "se_cost", "err_rate", "lower_bound"]
JOBS_ENV = "SEQBANDIT_JOBS"

_REQUIRED = {"name", "structure", "grid", "trials", "master_seed", "output", "trace"}
_OPTIONAL = {"true_expectation", "true_natural", "switch_cost", "prior", "max_steps"}


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    name: str
    kind: str
    K: int
    family: str
    family_params: dict
    true_natural: np.ndarray
    log_L: list
    gamma: list
    beta: list
    trials: int
    master_seed: int
    output: str
    trace: bool = False
    c: list | None = None
    switch_cost: list | None = None
    n0: float = 1.0
    kappa_ref: list | None = None
    max_steps: int | None = None
    _structure: HypothesisStructure | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        missing = _REQUIRED - raw.keys()
        if missing:
            raise ConfigError(f"missing keys: {sorted(missing)}")
        unknown = raw.keys() - _REQUIRED - _OPTIONAL
        if unknown:
            raise ConfigError(f"unknown keys: {sorted(unknown)}")
        if ("true_expectation" in raw) == ("true_natural" in raw):
            raise ConfigError("give exactly one of true_expectation / true_natural")
        st = raw["structure"]
        if not isinstance(st, dict) or not {"kind", "K", "family"} <= st.keys():
            raise ConfigError("structure needs kind, K and family")
        grid = raw["grid"]
        if not isinstance(grid, dict) or set(grid) != {"log_L", "gamma", "beta"}:
            raise ConfigError("grid needs exactly log_L, gamma and beta lists")
        prior = raw.get("prior") or {}
        if set(prior) - {"n0", "kappa_ref"}:
            raise ConfigError("prior accepts only n0 and kappa_ref")
        try:
            model = make_family(st["family"], **(st.get("family_params") or {}))
            K = int(st["K"])
            if "true_natural" in raw:
                etas = np.asarray(raw["true_natural"], dtype=float).reshape(K, model.d)
            else:
                etas = model.to_natural(np.asarray(raw["true_expectation"], dtype=float).reshape(K, model.d))
            cfg = cls(
                name=str(raw["name"]),
                kind=str(st["kind"]),
                K=K,
                family=str(st["family"]),
                family_params=dict(st.get("family_params") or {}),
                true_natural=etas,
                log_L=[float(v) for v in grid["log_L"]],
                gamma=[float(v) for v in grid["gamma"]],
                beta=[float(v) for v in grid["beta"]],
                trials=int(raw["trials"]),
                master_seed=int(raw["master_seed"]),
                output=str(raw["output"]),
                trace=bool(raw["trace"]),
                c=st.get("c"),
                switch_cost=raw.get("switch_cost"),
                n0=float(prior.get("n0", 1.0)),
                kappa_ref=prior.get("kappa_ref"),
                max_steps=None if raw.get("max_steps") is None else int(raw["max_steps"]),
            )
            cfg.validate()
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError, DomainError) as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "structure": {"kind": self.kind, "K": self.K, "family": self.family, "family_params": self.family_params},
            "true_natural": self.true_natural.tolist(),
            "grid": {"log_L": self.log_L, "gamma": self.gamma, "beta": self.beta},
            "trials": self.trials,
            "master_seed": self.master_seed,
            "output": self.output,
            "trace": self.trace,
            "prior": {"n0": self.n0, "kappa_ref": self.kappa_ref},
            "max_steps": self.max_steps,
            "switch_cost": self.switch_cost,
        }
        if self.c is not None:
            out["structure"]["c"] = self.c
        return out

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not (self.log_L and self.gamma and self.beta):
            raise ConfigError("every grid list must be non-empty")
        for log_L, gamma, beta in self.cells():
            self.policy_config(log_L, gamma, beta)
        s = self.structure()
        if s.hypothesis_of(self.true_natural) is None:
            raise ConfigError("true parameters lie in no hypothesis set")
        try:
            PosteriorState.empty(s.model, s.K, self.n0, self.kappa_ref)
        except ImproperPriorError as exc:
            raise ConfigError(str(exc)) from exc

    def structure(self) -> HypothesisStructure:
        if self._structure is None:
            model = make_family(self.family, **self.family_params)
            self._structure = make_structure(self.kind, model, self.K, self.c)
        return self._structure

    def cells(self):
        return list(itertools.product(self.log_L, self.gamma, self.beta))

    def policy_config(self, log_L, gamma, beta) -> PolicyConfig:
        return PolicyConfig(
            log_L=log_L, gamma=gamma, beta=beta,
            switch_cost=None if self.switch_cost is None else np.asarray(self.switch_cost, dtype=float),
            seed=self.master_seed, max_steps=self.max_steps, n0=self.n0, kappa_ref=self.kappa_ref,
        )

    def true_hypothesis(self) -> int:
        return self.structure().hypothesis_of(self.true_natural)

    def oracle(self) -> OracleResult:
        return optimal_weights(self.structure(), self.true_hypothesis(), self.true_natural)


@dataclass
class CellSummary:
    logL: float
    gamma: float
    beta: float
    mean_tau: float
    se_tau: float
    mean_cost: float
    se_cost: float
    err_rate: float
    lower_bound: float
    se_err: float = 0.0
    mean_switches: float = 0.0
    censored: int = 0
    trials: int = 0
    floor_violations: int = 0
    error: str | None = None

    def csv_row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def trial_seed(master_seed: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(trial,))


def _stderr(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def summarize(records, log_L, gamma, beta, lower_bound) -> CellSummary:
    kept = summarize_censoring(records)
    tau = np.array([r.tau for r in kept], dtype=float)
    cost = np.array([r.cost for r in kept], dtype=float)
    wrong = np.array([not r.correct for r in kept], dtype=float)
    n = len(kept)
    err = float(wrong.mean()) if n else math.nan
    return CellSummary(
        logL=log_L, gamma=gamma, beta=beta,
        mean_tau=float(tau.mean()) if n else math.nan, se_tau=_stderr(tau),
        mean_cost=float(cost.mean()) if n else math.nan, se_cost=_stderr(cost),
        err_rate=err, lower_bound=lower_bound,
        se_err=math.sqrt(err * (1.0 - err) / n) if n else math.nan,
        mean_switches=float(np.mean([r.switches for r in kept])) if n else math.nan,
        censored=len(records) - n, trials=len(records),
        floor_violations=int(sum(r.floor_violations for r in records)),
    )


def _run_cell(args):
    cfg, log_L, gamma, beta, d_star, trial_ids = args
    pc = cfg.policy_config(log_L, gamma, beta)
    s = cfg.structure()
    cap = horizon_cap(pc, s, cfg.true_natural) if cfg.max_steps is None else cfg.max_steps
    return [run_trial(pc, s, cfg.true_natural, trial_seed(cfg.master_seed, t), cap=cap) for t in trial_ids]


def run_cell(cfg: ExperimentConfig, log_L: float, gamma: float, beta: float, d_star: float | None = None,
             jobs: int = 1) -> CellSummary:
    """Run ``cfg.trials`` trials of one grid cell and summarise them."""
    try:
        if d_star is None:
            d_star = cfg.oracle().d_star
        lb = asymptotic_lower_bound(log_L, d_star)
        ids = list(range(cfg.trials))
        if jobs > 1:
            chunks = [ids[i::jobs] for i in range(jobs)]
            with ProcessPoolExecutor(jobs) as ex:
                parts = list(ex.map(_run_cell, [(cfg, log_L, gamma, beta, d_star, c) for c in chunks]))
            by_id = {}
            for chunk, recs in zip(chunks, parts):
                by_id.update(zip(chunk, recs))
            records = [by_id[i] for i in ids]
        else:
            records = _run_cell((cfg, log_L, gamma, beta, d_star, ids))
        return summarize(records, log_L, gamma, beta, lb)
    except (NonConvergenceError, DomainError, FloatingPointError, ArithmeticError) as exc:
        nan = math.nan
        return CellSummary(log_L, gamma, beta, nan, nan, nan, nan, nan, nan, error=f"{type(exc).__name__}: {exc}")


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def run_campaign(cfg: ExperimentConfig, jobs: int | None = None) -> list[CellSummary]:
    """Every grid cell, in the order emitted to CSV."""
    jobs = default_jobs() if jobs is None else jobs
    try:
        d_star = cfg.oracle().d_star
    except NonConvergenceError:
        d_star = None
    cells = sorted(cfg.cells(), key=lambda c: (c[2], c[1], c[0]))
    return [run_cell(cfg, log_L, gamma, beta, d_star, jobs) for log_L, gamma, beta in cells]


def _fmt(v) -> str:
    return repr(float(v))


def emit_csv(summaries, path) -> None:
    """Nine columns, one row per cell, sorted by (beta, gamma, logL)."""
    rows = sorted(summaries, key=lambda s: (s.beta, s.gamma, s.logL))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in rows:
            w.writerow([_fmt(v) for v in s.csv_row()])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def lower_bound_curve(d_star: float, log_L_max: float, step: float = 0.5):
    """(log L, log L / D*) pairs for 0 <= log L <= log_L_max."""
    if log_L_max < 0:
        raise DomainError("logL-max must be non-negative")
    n = int(math.floor(log_L_max / step + 1e-9))
    grid = [round(i * step, 12) for i in range(n + 1)]
    if grid[-1] < log_L_max:
        grid.append(float(log_L_max))
    return [(x, asymptotic_lower_bound(x, d_star)) for x in grid]


def write_trace(rows, path_or_file, M: int) -> None:
    """Per-step trace: n, arm, U, l_star, z_lstar, then Z_l for every l."""
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "arm", "U", "l_star", "z_lstar"] + [f"z_{l}" for l in range(M)])
        for r in rows:
            w.writerow([r["n"], r["arm"], r["U"], r["l_star"], _fmt(r["z_star"])] + [_fmt(v) for v in r["z"]])
    finally:
        if own:
            fh.close()
