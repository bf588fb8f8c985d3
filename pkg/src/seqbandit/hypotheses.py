"""Hypothesis structures over a K-armed bandit.

A structure owns the disjoint, relatively open parameter sets
``Theta_0, ..., Theta_{M-1}``.  Everything the test statistic and the oracle
need reduces to one primitive, the weighted Bregman projection

    project(m, w, kappa) = argmin over cl(Theta_m) of  sum_i w_i D(eta(kappa_i) || eta_i)

which is also the constrained maximum-likelihood estimate when ``w`` are the
empirical arm frequencies and ``kappa`` the empirical expectation parameters,
and the nearest alternative when ``w`` is a sampling distribution and
``kappa`` the true parameters.

Arms and hypotheses are indexed from 0.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np
from scipy import optimize

from .expfam import ExpFamily

MEMBERSHIP_TOL = 1e-12
PERTURB_STEP = 1e-6


class DegenerateWeightsError(ValueError):
    """The projection is undefined because a pooled group carries no weight."""


def _masked_sum(w, values):
    """sum_i w_i values_i, treating w_i == 0 terms as 0 even if values_i is nan/inf."""
    return float(np.sum(np.where(w > 0, w * np.where(w > 0, values, 0.0), 0.0)))


class HypothesisStructure(ABC):
    """Base class: ``model`` is shared by all ``K`` arms; ``M`` hypotheses."""

    def __init__(self, model: ExpFamily, K: int):
        if K < 2:
            raise ValueError("need at least two arms")
        self.model = model
        self.K = int(K)

    @property
    @abstractmethod
    def M(self) -> int: ...

    @abstractmethod
    def contains(self, etas, m: int) -> bool:
        """Exact membership of ``etas`` (shape (K, d)) in the open set Theta_m."""

    def hypothesis_of(self, etas) -> int | None:
        hits = [m for m in range(self.M) if self.contains(etas, m)]
        if len(hits) > 1:
            raise AssertionError("hypothesis sets overlap")
        return hits[0] if hits else None

    @abstractmethod
    def project(self, m: int, w, kappa) -> np.ndarray:
        """Weighted Bregman projection onto the closure of Theta_m.

        ``w`` are non-negative weights (need not sum to one); rows of ``kappa``
        whose weight is zero are ignored and may be nan.
        """

    @abstractmethod
    def _perturb_into(self, m: int, etas: np.ndarray) -> np.ndarray:
        """Move a closure point into the open set Theta_m."""

    def _clean(self, w, kappa):
        w = np.asarray(w, dtype=float).reshape(self.K)
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        kappa = np.asarray(kappa, dtype=float).reshape(self.K, self.model.d)
        return w, kappa

    def objective(self, w, kappa, etas) -> float:
        """sum_i w_i (eta_i . kappa_i - A(eta_i)), the per-sample log likelihood
        without the base-measure term."""
        w, kappa = self._clean(w, kappa)
        etas = np.asarray(etas, dtype=float).reshape(self.K, self.model.d)
        vals = np.sum(etas * np.where(w[:, None] > 0, kappa, 0.0), axis=-1) - self.model._A(etas)
        return _masked_sum(w, vals)

    def ml_sup(self, m: int, w, kappa) -> float:
        """Supremum of :meth:`objective` over Theta_m (may be +inf)."""
        w, kappa = self._clean(w, kappa)
        return float(self.ml_sups(w, kappa)[m])

    def ml_sups(self, w, kappa) -> np.ndarray:
        w, kappa = self._clean(w, kappa)
        model = self.model
        pos = w > 0
        ref = model.default_reference_expectation()
        k_obs = np.where(pos[:, None], kappa, ref)
        k_in = model.interior_expectation(k_obs)
        eta_hat = model._eta(k_in)
        own = model.dual_closure(k_obs)
        out = np.empty(self.M)
        for m in range(self.M):
            etas = self.project(m, w, np.where(pos[:, None], k_in, np.nan))
            moved = np.any(np.abs(etas - eta_hat) > 1e-13 * np.maximum(1.0, np.abs(eta_hat)), axis=-1)
            at_point = np.sum(etas * k_obs, axis=-1) - model._A(etas)
            out[m] = _masked_sum(w, np.where(moved, at_point, own))
        return out

    def constrained_ml(self, m: int, w, kappa, delta: float | None = None) -> np.ndarray:
        """Maximum-likelihood parameters restricted to Theta_m.

        When the supremum sits on the boundary of Theta_m the returned point is
        nudged inside; the objective loss is far below ``delta`` (default
        ``1 / sum(w)``).
        """
        w, kappa = self._clean(w, kappa)
        kappa_in = self.model.interior_expectation(np.where(w[:, None] > 0, kappa, np.nan))
        etas = self.project(m, w, kappa_in)
        if not self.contains(etas, m):
            etas = self._perturb_into(m, etas)
        if delta is not None:
            gap = self.ml_sup(m, w, kappa) - self.objective(w, kappa, etas)
            if gap > delta:
                raise AssertionError(f"constrained ML gap {gap} exceeds delta {delta}")
        return etas

    def alternative_values(self, l: int, lam, etas):
        """For every m != l, the infimum of sum_i lam_i D(eta_i || eta'_i) over Theta_m.

        Returns ``(values, divergences, minimizers)`` with shapes (M,), (M, K),
        (M, K, d); row ``l`` holds inf / nan.  ``divergences[m]`` is a
        supergradient of the m-th piece in ``lam``.
        """
        model = self.model
        etas = np.asarray(etas, dtype=float).reshape(self.K, model.d)
        lam = np.asarray(lam, dtype=float).reshape(self.K)
        kappa = model._kappa(etas)
        values = np.full(self.M, np.inf)
        divs = np.full((self.M, self.K), np.nan)
        mins = np.full((self.M, self.K, model.d), np.nan)
        for m in range(self.M):
            if m == l:
                continue
            proj = self.project(m, lam, kappa)
            d = model._kl(etas, proj)
            divs[m] = d
            mins[m] = proj
            values[m] = float(np.sum(np.where(lam > 0, lam * d, 0.0)))
        return values, divs, mins

    def weighted_alternative_inf(self, l: int, lam, etas):
        """F(lam, etas) = inf over Theta_{-l} of sum_i lam_i D(eta_i || eta'_i),
        and a point of the closure attaining it."""
        values, _, mins = self.alternative_values(l, lam, etas)
        m = int(np.argmin(values))
        return float(values[m]), mins[m]

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "K": self.K, "model": repr(self.model)}


class OddArm(HypothesisStructure):
    """Exactly one arm differs from the K - 1 others, which share a parameter.

    ``Theta_m = {eta_m = theta, eta_j = theta' for j != m, theta != theta'}``.
    """

    def __init__(self, model: ExpFamily, K: int):
        if K < 3:
            raise ValueError("odd-arm hypotheses are disjoint only for K >= 3")
        super().__init__(model, K)

    @property
    def M(self) -> int:
        return self.K

    def contains(self, etas, m):
        etas = np.asarray(etas, dtype=float).reshape(self.K, self.model.d)
        if not np.all(self.model.in_natural_domain(etas)):
            return False
        others = np.delete(etas, m, axis=0)
        common = others[0]
        if np.max(np.abs(others - common)) > MEMBERSHIP_TOL * max(1.0, np.max(np.abs(common))):
            return False
        return bool(np.max(np.abs(etas[m] - common)) > MEMBERSHIP_TOL)

    def project(self, m, w, kappa):
        w, kappa = self._clean(w, kappa)
        model = self.model
        rest = np.arange(self.K) != m
        w_rest = w[rest]
        if not np.any(w_rest > 0):
            raise DegenerateWeightsError(f"no weight outside arm {m}")
        pooled = np.sum(w_rest[w_rest > 0, None] * kappa[rest][w_rest > 0], axis=0) / np.sum(w_rest)
        theta_common = model._eta(pooled[None, :])[0]
        theta_odd = model._eta(kappa[m][None, :])[0] if w[m] > 0 else theta_common
        etas = np.tile(theta_common, (self.K, 1))
        etas[m] = theta_odd
        return etas

    def ml_sups(self, w, kappa):
        # vectorised over m: arm m alone plus the pooled remainder
        w, kappa = self._clean(w, kappa)
        model = self.model
        pos = w > 0
        kz = np.where(pos[:, None], kappa, 0.0)
        own = np.where(pos, w * model.dual_closure(np.where(pos[:, None], kappa, model.default_reference_expectation())), 0.0)
        S = np.sum(w[:, None] * kz, axis=0)
        W = np.sum(w)
        W_rest = W - w
        with np.errstate(divide="ignore", invalid="ignore"):
            pooled = (S[None, :] - w[:, None] * kz) / W_rest[:, None]
        rest_ok = W_rest > 0
        pooled = np.where(rest_ok[:, None], pooled, model.default_reference_expectation())
        rest_val = np.where(rest_ok, W_rest * model.dual_closure(pooled), 0.0)
        return own + rest_val

    def _perturb_into(self, m, etas):
        etas = etas.copy()
        common = etas[(m + 1) % self.K]
        step = PERTURB_STEP * max(1.0, float(np.max(np.abs(common))))
        for _ in range(60):
            for sign in (1.0, -1.0):
                cand = etas.copy()
                cand[m] = common + sign * step
                if self.contains(cand, m):
                    return cand
            step *= 2.0
        raise AssertionError("could not move odd-arm point into its hypothesis set")


class BestArm(HypothesisStructure):
    """Arm m is best: ``c . eta_m > c . eta_j`` for every j != m."""

    def __init__(self, model: ExpFamily, K: int, c=None):
        super().__init__(model, K)
        c = np.ones(model.d) if c is None else np.asarray(c, dtype=float).reshape(model.d)
        if not np.any(c != 0):
            raise ValueError("direction c must be non-zero")
        self.c = c

    @property
    def M(self) -> int:
        return self.K

    def describe(self):
        out = super().describe()
        out["c"] = self.c.tolist()
        return out

    def levels(self, etas) -> np.ndarray:
        return np.asarray(etas, dtype=float).reshape(self.K, self.model.d) @ self.c

    def contains(self, etas, m):
        etas = np.asarray(etas, dtype=float).reshape(self.K, self.model.d)
        if not np.all(self.model.in_natural_domain(etas)):
            return False
        s = self.levels(etas)
        others = np.delete(s, m)
        return bool(np.all(s[m] > others + MEMBERSHIP_TOL))

    # projection --------------------------------------------------------

    def project(self, m, w, kappa):
        w, kappa = self._clean(w, kappa)
        model = self.model
        active = np.flatnonzero(w > 0)
        if active.size == 0:
            raise DegenerateWeightsError("all weights are zero")
        with np.errstate(divide="ignore", invalid="ignore"):
            eta_hat = np.where((w > 0)[:, None], model._eta(np.where((w > 0)[:, None], kappa, model.default_reference_expectation())), np.nan)
        s = eta_hat @ self.c
        etas = eta_hat.copy()
        if w[m] == 0:
            # arm m is unconstrained by the data; put it on the top level
            top = active[np.argmax(s[active])]
            etas[m] = eta_hat[top]
            group, level_eta = [], eta_hat[top]
        else:
            order = [j for j in active[np.argsort(-s[active], kind="stable")] if j != m]
            group = [m]
            level_eta = eta_hat[m]
            t = s[m]
            for j in order:
                if s[j] < t:
                    break
                group.append(j)
                level_eta, t = self._pool(group, w, kappa, eta_hat)
            if len(group) > 1:
                etas[group] = level_eta
        fill = level_eta if w[m] == 0 else etas[m]
        for j in range(self.K):
            if w[j] == 0 and j != m:
                etas[j] = fill
        return etas

    def _pool(self, group, w, kappa, eta_hat):
        """Common-level projection of the arms in ``group``."""
        model = self.model
        g = np.asarray(group)
        if model.d == 1:
            pooled = np.sum(w[g, None] * kappa[g], axis=0) / np.sum(w[g])
            eta = model._eta(pooled[None, :])[0]
            return eta, float(eta @ self.c)
        # d > 1: arms share only the level c.eta; each arm is projected onto the slice
        s = eta_hat[g] @ self.c
        lo, hi = float(np.min(s)), float(np.max(s))
        if hi - lo < 1e-15:
            return eta_hat[g], lo

        def cost(t):
            return sum(w[i] * model._kl(eta_hat[i], self._slice(kappa[i], t)) for i in g)

        res = optimize.minimize_scalar(cost, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        t = float(res.x)
        return np.array([self._slice(kappa[i], t) for i in g]), t

    def _slice(self, kappa_i, t):
        """argmin over {c.eta = t} of D(eta(kappa_i) || eta): kappa(eta) = kappa_i + nu c."""
        model = self.model
        c = self.c

        def level(nu):
            with np.errstate(all="ignore"):
                eta = model._eta(kappa_i + nu * c)
                v = float(eta @ c) - t
            return v if np.isfinite(v) and model.in_natural_domain(eta) else np.nan

        # the level is increasing in nu and steep at the domain edges; walk out
        # from nu = 0 (kappa_i is interior) until the sign changes
        f0 = level(0.0)
        if np.isnan(f0):
            raise ValueError("expectation parameter outside the domain")
        if f0 == 0.0:
            return model._eta(kappa_i)
        direction = 1.0 if f0 < 0 else -1.0
        a, step = 0.0, 1.0
        for _ in range(400):
            b = a + direction * step
            fb = level(b)
            if np.isnan(fb):
                step *= 0.5
                continue
            if (fb < 0) != (f0 < 0) or fb == 0.0:
                break
            a, step = b, 2.0 * step
        else:
            raise ValueError("no level crossing on the slice")
        lo, hi = min(a, b), max(a, b)
        nu = optimize.brentq(level, lo, hi, xtol=1e-14, rtol=1e-14)
        return model._eta(kappa_i + nu * c)

    def _perturb_into(self, m, etas):
        model = self.model
        direction = self.c / np.linalg.norm(self.c)
        s = self.levels(etas)
        tied = [j for j in range(self.K) if j != m and s[j] >= s[m] - MEMBERSHIP_TOL]
        scale = max(1.0, float(np.max(np.abs(etas[m]))))
        step = PERTURB_STEP * scale
        for _ in range(60):
            for movers, sign in ((tied, -1.0), ([m], 1.0)):
                cand = etas.copy()
                cand[movers] = cand[movers] + sign * step * direction
                if self.contains(cand, m):
                    return cand
            step *= 2.0
        raise AssertionError("could not move best-arm point into its hypothesis set")


def make_structure(kind: str, model: ExpFamily, K: int, c=None) -> HypothesisStructure:
    kind = kind.lower().replace("-", "_")
    if kind == "odd_arm":
        return OddArm(model, K)
    if kind == "best_arm":
        return BestArm(model, K, c)
    raise ValueError(f"unknown structure kind {kind!r}")
