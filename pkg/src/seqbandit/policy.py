"""The sluggish, modified-GLR policy with forced exploration.

At every time n the policy scores each hypothesis by Z_l(n), stops when the
best score clears ``log((M - 1) L)``, and otherwise flips a coin with bias
``gamma``.  Tails keeps the current arm.  Heads is an active step: an arm
that has fallen behind the ``(n_a)^beta`` exploration schedule is pulled,
else the arm furthest behind the target ``n_a * lam*`` is pulled, where
``lam*`` is the oracle weight vector at the constrained ML estimate of the
leading hypothesis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .expfam import DomainError
from .glr import PosteriorState, log_marginal_normalizers, z_mins
from .hypotheses import DegenerateWeightsError, HypothesisStructure, OddArm
from .oracle import NonConvergenceError, optimal_weights

CAP_FACTOR = 200
DEFAULT_CAP = 1_000_000
QUANT_STEP = 1e-4
TIE_TOL = 1e-12


@dataclass
class PolicyConfig:
    """Parameters of pi_SMF(L, gamma, beta) plus run plumbing.

    ``log_L`` is the log of the threshold parameter (L >= 1).  The switch
    cost defaults to 1 for every change of arm.
    """

    log_L: float
    gamma: float
    beta: float
    switch_cost: np.ndarray | None = None
    seed: int | None = None
    max_steps: int | None = None
    n0: float = 1.0
    kappa_ref: list | None = None
    oracle_method: str = "auto"
    record_arms: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.log_L) and self.log_L >= 0):
            raise ValueError("log_L must be finite and >= 0 (L >= 1)")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.5 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0.5, 1)")
        if self.n0 <= 0:
            raise ValueError("n0 must be positive")
        if self.switch_cost is not None:
            g = np.asarray(self.switch_cost, dtype=float)
            if g.ndim != 2 or g.shape[0] != g.shape[1]:
                raise ValueError("switch_cost must be a square matrix")
            if np.any(np.diag(g) != 0) or np.any(g < 0) or not np.all(np.isfinite(g)):
                raise ValueError("switch_cost needs a zero diagonal and finite non-negative entries")
            self.switch_cost = g

    def cost_matrix(self, K: int) -> np.ndarray:
        if self.switch_cost is None:
            return np.ones((K, K)) - np.eye(K)
        if self.switch_cost.shape != (K, K):
            raise ValueError(f"switch_cost is {self.switch_cost.shape}, expected {(K, K)}")
        return self.switch_cost

    def threshold(self, M: int) -> float:
        return math.log(M - 1) + self.log_L


@dataclass
class PolicyState:
    posterior: PosteriorState
    N_a: np.ndarray
    n_a: int
    current_arm: int
    rng: np.random.Generator
    switches: int = 0
    switch_cost: float = 0.0
    floor_violations: int = 0
    stopped: int | None = None
    last_z: np.ndarray | None = None
    lam_cache: dict = field(default_factory=dict)
    arms: list | None = None

    @property
    def n(self) -> int:
        return self.posterior.n

    @property
    def N(self) -> np.ndarray:
        return self.posterior.N


@dataclass
class Continue:
    arm: int
    active: bool
    l_star: int
    z_star: float


@dataclass
class Stop:
    decision: int
    z_star: float


@dataclass
class TrialRecord:
    tau: int
    delta: int | None
    cost: float
    switches: int
    correct: bool
    censored: bool = False
    active_steps: int = 0
    floor_violations: int = 0
    arm_history: list | None = None


def exploration_floor(n_a: int, beta: float, K: int) -> float:
    """Guaranteed active pulls per arm: [(n_a)^beta - (beta (K + 1))^(beta / (1 - beta))]_+ - 1."""
    return max(n_a**beta - (beta * (K + 1)) ** (beta / (1.0 - beta)), 0.0) - 1.0


def _pick(values, rng, largest=True) -> int:
    """arg-max (or arg-min) with uniformly random tie breaking."""
    v = np.asarray(values, dtype=float)
    if not largest:
        v = -v
    best = np.max(v)
    if best == np.inf:
        ties = np.flatnonzero(v == np.inf)
    elif best == -np.inf:
        ties = np.arange(v.size)
    else:
        ties = np.flatnonzero(v >= best - TIE_TOL * max(1.0, abs(best)))
    if ties.size == 1:
        return int(ties[0])
    return int(ties[rng.integers(ties.size)])


class SMFPolicy:
    """pi_SMF(L, gamma, beta) for a fixed hypothesis structure.

    With ``stopping=False`` the same dynamics run without ever stopping (the
    diagnostic variant used for convergence checks).
    """

    def __init__(self, config: PolicyConfig, structure: HypothesisStructure, stopping: bool = True):
        self.config = config
        self.structure = structure
        self.stopping = stopping
        self.K = structure.K
        self.M = structure.M
        self.g = config.cost_matrix(self.K)
        self.threshold = config.threshold(self.M)
        b = config.beta
        self._explore_offset = (b * self.K) ** (b / (1.0 - b))
        method = config.oracle_method
        if method == "auto":
            method = "brent" if isinstance(structure, OddArm) else "simplex"
        self.oracle_method = method
        self._prior_lmn = None

    def start(self, sampler, rng: np.random.Generator) -> PolicyState:
        """Pull arm 0 once and return the state at n = 1."""
        post = PosteriorState.empty(self.structure.model, self.K, self.config.n0, self.config.kappa_ref)
        if self._prior_lmn is None:
            self._prior_lmn = log_marginal_normalizers(self.structure, post.upsilon, post.n0)
        N_a = np.zeros(self.K, dtype=np.int64)
        N_a[0] = 1
        state = PolicyState(post, N_a, 1, 0, rng, arms=[0] if self.config.record_arms else None)
        post.update(0, sampler(0))
        self._check_floor(state)
        return state

    def scores(self, state: PolicyState) -> np.ndarray:
        return z_mins(self.structure, state.posterior, self._prior_lmn)

    def target_weights(self, state: PosteriorState, l_star: int, cache: dict | None = None) -> np.ndarray:
        """lam* at the constrained ML estimate of hypothesis ``l_star``.

        Falls back to uniform weights while the estimate is degenerate.
        """
        K = self.K
        uniform = np.full(K, 1.0 / K)
        if np.any(state.N == 0):
            return uniform
        try:
            with np.errstate(all="ignore"):
                eta_star = self.structure.constrained_ml(l_star, state.N.astype(float), state.kappa_hat())
        except (DegenerateWeightsError, DomainError, FloatingPointError):
            return uniform
        if not np.all(np.isfinite(eta_star)):
            return uniform
        key = (l_star, tuple(np.round(eta_star.ravel() / QUANT_STEP).astype(np.int64).tolist()))
        if cache is not None and key in cache:
            return cache[key]
        try:
            with np.errstate(all="ignore"):
                lam = optimal_weights(self.structure, l_star, eta_star, self.oracle_method).lam_star
        except (DomainError, DegenerateWeightsError):
            lam = uniform
        if not np.all(np.isfinite(lam)):
            lam = uniform
        if cache is not None:
            cache[key] = lam
        return lam

    def decide(self, state: PolicyState):
        """Score, then stop or choose the next arm (without sampling it)."""
        z = self.scores(state)
        state.last_z = z
        l_star = _pick(z, state.rng)
        z_star = float(z[l_star])
        if self.stopping and z_star >= self.threshold:
            state.stopped = l_star
            return Stop(l_star, z_star)
        active = bool(state.rng.random() < self.config.gamma)
        if not active:
            return Continue(state.current_arm, False, l_star, z_star)
        state.n_a += 1
        n_a = state.n_a
        if np.any(state.N_a < n_a**self.config.beta - self._explore_offset):
            arm = _pick(state.N_a, state.rng, largest=False)
        else:
            lam = self.target_weights(state.posterior, l_star, state.lam_cache)
            arm = _pick(n_a * lam - state.N_a, state.rng)
        state.N_a[arm] += 1
        return Continue(arm, True, l_star, z_star)

    def advance(self, state: PolicyState, action: Continue, sampler) -> None:
        arm = action.arm
        if arm != state.current_arm:
            state.switches += 1
            state.switch_cost += float(self.g[state.current_arm, arm])
        state.current_arm = arm
        state.posterior.update(arm, sampler(arm))
        if state.arms is not None:
            state.arms.append(arm)
        self._check_floor(state)

    def step(self, state: PolicyState, sampler):
        if state.stopped is not None:
            raise RuntimeError("policy has already stopped")
        action = self.decide(state)
        if isinstance(action, Continue):
            self.advance(state, action, sampler)
        return action

    def _check_floor(self, state: PolicyState) -> None:
        floor = exploration_floor(state.n_a, self.config.beta, self.K)
        if np.any(state.N_a < floor):
            state.floor_violations += 1


def horizon_cap(config: PolicyConfig, structure: HypothesisStructure, etas, l_true: int | None = None) -> int:
    """``CAP_FACTOR * ceil(threshold / D*)``, or ``DEFAULT_CAP`` if D* is unavailable."""
    if config.max_steps is not None:
        return int(config.max_steps)
    if l_true is None:
        l_true = structure.hypothesis_of(etas)
    try:
        d = optimal_weights(structure, l_true, etas).d_star
    except (DomainError, NonConvergenceError, DegenerateWeightsError, TypeError):
        return DEFAULT_CAP
    if not d > 0:
        return DEFAULT_CAP
    return CAP_FACTOR * max(1, math.ceil(config.threshold(structure.M) / d))


def trial_streams(seed) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (observation, policy) generators from one seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    obs, pol = ss.spawn(2)
    return np.random.default_rng(obs), np.random.default_rng(pol)


def run_trial(config: PolicyConfig, structure: HypothesisStructure, etas, seed=None,
              cap: int | None = None, trace: list | None = None) -> TrialRecord:
    """Run pi_SMF on arms with natural parameters ``etas`` until it stops.

    ``seed`` (int or SeedSequence) defaults to ``config.seed``.  A trial that
    reaches ``cap`` steps is returned as censored.  If ``trace`` is a list,
    one dict per time step is appended to it.
    """
    model = structure.model
    etas = np.asarray(etas, dtype=float).reshape(structure.K, model.d)
    l_true = structure.hypothesis_of(etas)
    if l_true is None:
        raise DomainError("true configuration lies in no hypothesis set")
    if cap is None:
        cap = horizon_cap(config, structure, etas, l_true)
    obs_rng, pol_rng = trial_streams(config.seed if seed is None else seed)

    def sampler(arm):
        return model.sample(etas[arm], obs_rng)

    policy = SMFPolicy(config, structure)
    state = policy.start(sampler, pol_rng)
    censored = False
    while True:
        action = policy.step(state, sampler)
        if trace is not None:
            row = {"n": state.n if isinstance(action, Stop) else state.n - 1}
            if isinstance(action, Stop):
                row.update(arm=-1, U="", l_star=action.decision, z_star=action.z_star)
            else:
                row.update(arm=action.arm, U=int(action.active), l_star=action.l_star, z_star=action.z_star)
            row["z"] = state.last_z.copy()
            trace.append(row)
        if isinstance(action, Stop):
            break
        if state.n >= cap:
            censored = True
            break
    tau = state.n
    delta = state.stopped
    return TrialRecord(
        tau=tau,
        delta=delta,
        cost=tau + state.switch_cost,
        switches=state.switches,
        correct=delta == l_true,
        censored=censored,
        active_steps=state.n_a,
        floor_violations=state.floor_violations,
        arm_history=state.arms,
    )


@dataclass
class NonStoppingDiagnostics:
    freqs: np.ndarray
    z: np.ndarray
    l_star: np.ndarray
    lam_star: np.ndarray
    floor_violations: int
    switches: int


def run_nonstopping(config: PolicyConfig, structure: HypothesisStructure, etas, horizon: int,
                    seed=None) -> NonStoppingDiagnostics:
    """Same dynamics as :func:`run_trial` but never stops.

    Row ``t`` of each trajectory refers to time ``n = t + 1``: ``freqs`` holds
    N_i^n / n, ``z`` holds Z_l(n) and ``l_star`` the leading hypothesis.
    """
    model = structure.model
    etas = np.asarray(etas, dtype=float).reshape(structure.K, model.d)
    l_true = structure.hypothesis_of(etas)
    obs_rng, pol_rng = trial_streams(config.seed if seed is None else seed)

    def sampler(arm):
        return model.sample(etas[arm], obs_rng)

    policy = SMFPolicy(config, structure, stopping=False)
    state = policy.start(sampler, pol_rng)
    freqs = np.empty((horizon, structure.K))
    z = np.empty((horizon, structure.M))
    lstar = np.empty(horizon, dtype=np.int64)
    for t in range(horizon):
        action = policy.step(state, sampler)
        freqs[t] = (state.N - (np.arange(structure.K) == action.arm)) / (state.n - 1)
        z[t] = state.last_z
        lstar[t] = action.l_star
    lam = optimal_weights(structure, l_true, etas).lam_star if l_true is not None else np.full(structure.K, np.nan)
    return NonStoppingDiagnostics(freqs, z, lstar, lam, state.floor_violations, state.switches)


def summarize_censoring(records) -> list:
    """Drop censored trials with a warning."""
    kept = [r for r in records if not r.censored]
    if len(kept) < len(records):
        warnings.warn(f"{len(records) - len(kept)} censored trial(s) excluded from averages", RuntimeWarning)
    return kept
