"""Conjugate-prior bookkeeping and the modified GLR statistic.

Per arm the only state is the accumulated sufficient statistic ``Y_i`` and
the pull count ``N_i``.  With conjugate prior hyperparameters
``(upsilon_i, n0_i)`` the averaged likelihood of hypothesis l is

    log H_l(upsilon, n0) - log H_l(Y + upsilon, N + n0)

where ``log H_l`` is minus the log normaliser of the prior restricted to
Theta_l.  The maximised likelihood over Theta_m is ``n * sup sum_i w_i
(eta_i . kappa_hat_i - A(eta_i))``.  Both leave out ``sum_t log h(x_t)``,
which cancels in every ratio and is never computed.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special, stats

from .expfam import ExpFamily, ImproperPriorError, ScalarLaw
from .hypotheses import BestArm, HypothesisStructure, OddArm

QUAD_EPSREL = 1e-8
IS_DRAWS = 100_000
_TAIL = 1e-12
_DROP = 60.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_GRID = 257
_GL_NODES = 128
_EDGE_STEPS = 200


@dataclass
class PosteriorState:
    """Sufficient statistics and prior hyperparameters for K arms."""

    Y: np.ndarray
    N: np.ndarray
    upsilon: np.ndarray
    n0: np.ndarray
    n: int = 0
    model: ExpFamily | None = field(default=None, repr=False, compare=False)

    @classmethod
    def empty(cls, model: ExpFamily, K: int, n0=1.0, kappa_ref=None) -> "PosteriorState":
        """Fresh state with prior ``upsilon_i = n0_i * kappa_ref``."""
        n0 = np.broadcast_to(np.asarray(n0, dtype=float), (K,)).copy()
        ref = model.default_reference_expectation() if kappa_ref is None else np.asarray(kappa_ref, dtype=float)
        ref = np.broadcast_to(ref.reshape(-1, model.d) if ref.ndim > 1 else ref.reshape(model.d), (K, model.d))
        upsilon = n0[:, None] * ref
        if not np.all(model.prior_is_proper(upsilon, n0)):
            raise ImproperPriorError(f"prior (upsilon={upsilon.tolist()}, n0={n0.tolist()}) is improper for {model.name}")
        return cls(np.zeros((K, model.d)), np.zeros(K, dtype=np.int64), upsilon, n0, 0, model)

    @classmethod
    def from_observations(cls, model, K, arms, xs, n0=1.0, kappa_ref=None) -> "PosteriorState":
        """Build a state in one pass by direct summation."""
        st = cls.empty(model, K, n0, kappa_ref)
        arms = np.asarray(arms, dtype=int)
        T = model.suff_stat(np.asarray(xs, dtype=float))
        np.add.at(st.Y, arms, T)
        st.N = np.bincount(arms, minlength=K).astype(np.int64)
        st.n = int(arms.size)
        return st

    @property
    def K(self) -> int:
        return self.N.shape[0]

    def update(self, arm: int, x) -> "PosteriorState":
        """Record observation ``x`` from ``arm`` in place."""
        self.Y[arm] += self.model.suff_stat(x)
        self.N[arm] += 1
        self.n += 1
        return self

    def copy(self) -> "PosteriorState":
        return PosteriorState(self.Y.copy(), self.N.copy(), self.upsilon.copy(), self.n0.copy(), self.n, self.model)

    def posterior_hyper(self):
        return self.Y + self.upsilon, self.N + self.n0

    def kappa_hat(self) -> np.ndarray:
        """Empirical expectation parameters; nan rows for unsampled arms."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.N[:, None] > 0, self.Y / np.maximum(self.N, 1)[:, None], np.nan)

    def weights(self) -> np.ndarray:
        return self.N / self.n if self.n else np.zeros(self.K)


# -- level laws for the best-arm normaliser -------------------------------


class _GammaNormalLevel:
    """Law of ``s = a u + b sqrt(u) Z`` with u ~ Gamma(shape, rate), Z ~ N(0, 1).

    Represented as a finite normal mixture over Gauss-Legendre nodes in the
    quantile space of u.
    """

    def __init__(self, shape, rate, a, b2, nodes=96):
        t, w = np.polynomial.legendre.leggauss(nodes)
        q = 0.5 * (t + 1.0)
        u = stats.gamma.ppf(q, shape, scale=1.0 / rate)
        self.logw = np.log(0.5 * w)
        self.mean = a * u
        self.sd = np.sqrt(b2 * u)

    def logpdf(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        z = (s - self.mean) / self.sd
        return special.logsumexp(self.logw - 0.5 * z * z - np.log(self.sd) - _HALF_LOG_2PI, axis=-1)

    def logcdf(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        return special.logsumexp(self.logw + special.log_ndtr((s - self.mean) / self.sd), axis=-1)

    def support_range(self):
        return float(np.min(self.mean - 9.0 * self.sd)), float(np.max(self.mean + 9.0 * self.sd))

    def rvs(self, size, rng):
        k = rng.choice(self.mean.size, size=size, p=np.exp(self.logw) / np.exp(self.logw).sum())
        return rng.normal(self.mean[k], self.sd[k])


def _support_range(law):
    if isinstance(law, ScalarLaw):
        # ppf can round to the edge of the natural domain; widen the tail until finite
        for tail in (_TAIL, 1e-9, 1e-6, 1e-3):
            lo, hi = float(law.ppf(tail)), float(law.ppf(1.0 - tail))
            if np.isfinite(lo) and np.isfinite(hi):
                return min(lo, hi), max(lo, hi)
        raise FloatingPointError("level law has no finite bulk")
    return law.support_range()


def level_law(model: ExpFamily, upsilon, n0, c):
    """Law of ``c . eta`` under the normalised conjugate prior."""
    c = np.asarray(c, dtype=float).reshape(model.d)
    if model.d == 1:
        return model.natural_law(upsilon, n0).scaled(c[0])
    if hasattr(model, "prior_components"):
        shape, rate, slope, var_slope = model.prior_components(upsilon, n0)
        if c[0] == 0.0:
            base = ScalarLaw(stats.gamma(a=shape, scale=1.0 / rate), lambda x: x, lambda y: y,
                             lambda y: np.zeros_like(np.asarray(y, dtype=float)), sign=-1.0)
            return base.scaled(c[1])
        return _GammaNormalLevel(shape, rate, c[0] * slope - c[1], c[0] ** 2 * var_slope)
    raise NotImplementedError(f"no level law for {model.name}")


def log_prob_top(laws, l: int) -> float:
    """log P(s_l > s_j for all j != l) for independent levels s_i ~ laws[i].

    Integrates ``exp(g(s) - g*)`` with ``g = logpdf_l + sum_j logcdf_j``
    either side of its mode by Gauss-Legendre, checked against a rule of half
    the order.  Falls back to adaptive quadrature, then importance sampling.
    """
    law_l = laws[l]
    rest = [law for j, law in enumerate(laws) if j != l]

    def g(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(all="ignore"):
            v = law_l.logpdf(s) + sum(law.logcdf(s) for law in rest)
        return np.where(np.isnan(v), -np.inf, v)

    lo, hi = _support_range(law_l)
    top = max([hi] + [_support_range(law)[1] for law in rest])
    grid = np.concatenate([np.linspace(lo, hi, _GRID), np.linspace(lo, top, _GRID)])
    gv = g(grid)
    i = int(np.argmax(gv))
    if not np.isfinite(gv[i]):
        return -np.inf
    s_star, g_star = float(grid[i]), float(gv[i])
    hi = top

    steps = max(1e-8, 1e-3 * (hi - lo)) * 2.0 ** np.arange(_EDGE_STEPS)

    def edge(direction):
        xs = s_star + direction * steps
        below = np.nonzero(g(xs) < g_star - _DROP)[0]
        return float(xs[below[0]] if below.size else xs[-1])

    a, b = edge(-1.0), edge(1.0)
    if isinstance(law_l, ScalarLaw):
        # the integrand vanishes outside the support; a hard edge spoils Gauss-Legendre
        with np.errstate(divide="ignore"):
            ends = law_l.ppf(np.array([0.0, 1.0]))
        a, b = max(a, float(np.min(ends))), min(b, float(np.max(ends)))

    def gauss(n):
        t, w = np.polynomial.legendre.leggauss(n)
        total = 0.0
        for u, v in ((a, s_star), (s_star, b)):
            half = 0.5 * (v - u)
            total += half * float(np.sum(w * np.exp(g(u + half * (t + 1.0)) - g_star)))
        return total

    coarse, fine = gauss(_GL_NODES // 2), gauss(_GL_NODES)
    if fine > 0.0 and abs(fine - coarse) <= QUAD_EPSREL * fine:
        return g_star + math.log(fine)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(lambda s: math.exp(float(g(s)) - g_star), a, b, points=[s_star],
                                    epsrel=QUAD_EPSREL, epsabs=0.0, limit=200)
            return g_star + math.log(val)
        except integrate.IntegrationWarning:
            pass
    # fallback: Student-t proposal centred at the mode
    rng = np.random.default_rng(0)
    scale = (b - a) / 20.0
    draws = s_star + scale * rng.standard_t(5, size=IS_DRAWS)
    logq = stats.t.logpdf(draws, 5, loc=s_star, scale=scale)
    return float(special.logsumexp(g(draws) - logq) - math.log(IS_DRAWS))


# -- normalisers ------------------------------------------------------------


def log_marginal_normalizers(structure: HypothesisStructure, upsilon, n0) -> np.ndarray:
    """log of the prior integral restricted to Theta_l, for every l (shape (M,))."""
    model = structure.model
    K = structure.K
    upsilon = np.asarray(upsilon, dtype=float).reshape(K, model.d)
    n0 = np.broadcast_to(np.asarray(n0, dtype=float), (K,))
    own = model.log_prior_normalizer(upsilon, n0)
    if isinstance(structure, OddArm):
        # arm l alone, plus the K - 1 others sharing one parameter
        pooled_u = upsilon.sum(axis=0) - upsilon
        pooled_n = n0.sum() - n0
        return own + model.log_prior_normalizer(pooled_u, pooled_n)
    if isinstance(structure, BestArm):
        laws = [level_law(model, upsilon[i], n0[i], structure.c) for i in range(K)]
        base = float(np.sum(own))
        return np.array([base + log_prob_top(laws, l) for l in range(K)])
    raise NotImplementedError(f"no normaliser for {type(structure).__name__}")


def log_marginal_normalizer(structure: HypothesisStructure, l: int, upsilon, n0) -> float:
    return float(log_marginal_normalizers(structure, upsilon, n0)[l])


def log_avg_likelihoods(structure: HypothesisStructure, state: PosteriorState, prior_lmn=None) -> np.ndarray:
    """Averaged log likelihood of every hypothesis, without the h(x) terms."""
    if prior_lmn is None:
        prior_lmn = log_marginal_normalizers(structure, state.upsilon, state.n0)
    if state.n == 0:
        return np.zeros(structure.M)
    u, n0 = state.posterior_hyper()
    return log_marginal_normalizers(structure, u, n0) - prior_lmn


def log_avg_likelihood(structure: HypothesisStructure, l: int, state: PosteriorState) -> float:
    return float(log_avg_likelihoods(structure, state)[l])


def log_ml_likelihoods(structure: HypothesisStructure, state: PosteriorState) -> np.ndarray:
    """Maximised log likelihood over each Theta_m, without the h(x) terms."""
    if state.n == 0:
        return np.zeros(structure.M)
    # sup of sum_i N_i (eta_i . kappa_i - A(eta_i)) = n * sup sum_i w_i (...)
    return structure.ml_sups(state.N.astype(float), state.kappa_hat())


def log_ml_likelihood(structure: HypothesisStructure, m: int, state: PosteriorState) -> float:
    return float(log_ml_likelihoods(structure, state)[m])


def z_matrix(structure: HypothesisStructure, state: PosteriorState, prior_lmn=None) -> np.ndarray:
    """Z[l, m] = Z_lm(n); the diagonal is nan."""
    avg = log_avg_likelihoods(structure, state, prior_lmn)
    ml = log_ml_likelihoods(structure, state)
    with np.errstate(invalid="ignore"):
        Z = avg[:, None] - ml[None, :]
    np.fill_diagonal(Z, np.nan)
    return Z


def z_mins(structure: HypothesisStructure, state: PosteriorState, prior_lmn=None) -> np.ndarray:
    """Z_l(n) = min over m != l of Z_lm(n), for every l."""
    return np.nanmin(z_matrix(structure, state, prior_lmn), axis=1)


def z_lm(structure: HypothesisStructure, l: int, m: int, state: PosteriorState) -> float:
    if l == m:
        raise ValueError("z_lm needs l != m")
    return log_avg_likelihood(structure, l, state) - log_ml_likelihood(structure, m, state)


def z_min(structure: HypothesisStructure, l: int, state: PosteriorState) -> float:
    return float(z_mins(structure, state)[l])


def write_z_trace(path, rows, M: int) -> None:
    """Write ``(n, Z_0, ..., Z_{M-1})`` rows as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n"] + [f"z_{l}" for l in range(M)])
        for n, z in rows:
            w.writerow([int(n)] + [repr(float(v)) for v in z])
