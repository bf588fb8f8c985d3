"""The max-min sampling problem and the delay lower bound.

For a configuration ``etas`` in Theta_l,

    F(lam) = inf over Theta_{-l} of sum_i lam_i D(eta_i || eta'_i)

is concave in ``lam`` (a pointwise infimum of linear functions).  Its maximum
over the simplex is the information rate ``D*`` and the maximiser ``lam*`` is
the sampling target tracked by the policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .expfam import DomainError
from .hypotheses import HypothesisStructure, OddArm

GOLDEN_TOL = 1e-10
MAX_ITER = 5000
GAP_TOL = 1e-5

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class NonConvergenceError(RuntimeError):
    """The optimiser stopped with a certificate gap above tolerance."""


@dataclass
class OracleResult:
    lam_star: np.ndarray
    d_star: float
    iterations: int
    certificate_gap: float
    method: str = ""


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def alternative_value(structure: HypothesisStructure, l: int, lam, etas) -> float:
    """F(lam, etas)."""
    return structure.weighted_alternative_inf(l, lam, etas)[0]


def _check_member(structure, l, etas):
    etas = np.asarray(etas, dtype=float).reshape(structure.K, structure.model.d)
    if not structure.contains(etas, l):
        raise DomainError(f"configuration is not in the open hypothesis set {l}")
    return etas


# -- odd arm: one-dimensional reduction ---------------------------------


def _odd_arm_divergences(model, K, x, k_pair):
    """(D(odd || pooled), D(common || pooled), weight of the common group)."""
    c = (1.0 - x) * (K - 2) / (K - 1)
    kt = (x * k_pair[0] + c * k_pair[1]) / (x + c)
    d = model.kl_from_expectation(k_pair, kt)
    return float(d[0]), float(d[1]), c


def _kappa_pair(model, eta_odd, eta_common):
    return model._kappa(np.stack([np.asarray(eta_odd, dtype=float), np.asarray(eta_common, dtype=float)]))


def odd_arm_phi(model, K: int, lam_odd: float, eta_odd, eta_common, k_pair=None) -> float:
    """Objective of the symmetric reduction.

    With lam = ((1 - x)/(K - 1), ..., x, ...), the nearest alternative pools
    the odd arm with the K - 2 arms that stay common.
    """
    x = float(lam_odd)
    if k_pair is None:
        k_pair = _kappa_pair(model, eta_odd, eta_common)
    if x + (1.0 - x) * (K - 2) / (K - 1) <= 0:
        return 0.0
    d1, d2, c = _odd_arm_divergences(model, K, x, k_pair)
    return x * d1 + c * d2


def odd_arm_phi_derivative(model, K: int, lam_odd: float, eta_odd, eta_common, k_pair=None) -> float:
    """dPhi/dx = D(eta_odd || eta~) - (K-2)/(K-1) D(eta_common || eta~) (envelope form)."""
    if k_pair is None:
        k_pair = _kappa_pair(model, eta_odd, eta_common)
    d1, d2, _ = _odd_arm_divergences(model, K, float(lam_odd), k_pair)
    return d1 - (K - 2) / (K - 1) * d2


def golden_section_max(f, a: float, b: float, tol: float = GOLDEN_TOL, max_iter: int = 500):
    """Maximise a unimodal function on [a, b].  Returns (x, f(x), iterations)."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        it += 1
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x), it


def odd_arm_weights(structure: OddArm, l: int, etas, method: str = "golden") -> OracleResult:
    """lam* and D* for the odd-arm structure via the one-dimensional reduction.

    ``method`` is ``"golden"`` (golden-section search on Phi) or ``"brent"``
    (root of dPhi/dx, which is strictly decreasing).
    """
    etas = _check_member(structure, l, etas)
    model, K = structure.model, structure.K
    eta_odd = etas[l]
    eta_common = etas[(l + 1) % K]
    kp = _kappa_pair(model, eta_odd, eta_common)
    if method == "golden":
        x, val, it = golden_section_max(lambda t: odd_arm_phi(model, K, t, eta_odd, eta_common, kp), 0.0, 1.0)
    elif method == "brent":
        x, info = optimize.brentq(
            lambda t: odd_arm_phi_derivative(model, K, t, eta_odd, eta_common, kp),
            0.0, 1.0, xtol=GOLDEN_TOL, full_output=True,
        )
        it = info.iterations
        val = odd_arm_phi(model, K, x, eta_odd, eta_common, kp)
    else:
        raise ValueError(f"unknown method {method!r}")
    lam = np.full(K, (1.0 - x) / (K - 1))
    lam[l] = x
    # concavity on [0, 1]: Phi(y) <= Phi(x) + |Phi'(x)| for any y
    gap = abs(odd_arm_phi_derivative(model, K, x, eta_odd, eta_common, kp)) * max(x, 1.0 - x)
    return OracleResult(lam, float(val), it, float(gap), f"odd_arm_{method}")


# -- generic: supergradient ascent + epigraph polish ----------------------


def simplex_weights(
    structure: HypothesisStructure,
    l: int,
    etas,
    max_iter: int = MAX_ITER,
    gap_tol: float = GAP_TOL,
    target_gap: float = 1e-9,
    warm_start: int = 200,
    step: float = 0.5,
) -> OracleResult:
    """Maximise F(., etas) over the simplex for any structure.

    Projected supergradient ascent (step ``step / sqrt(t)``, supergradient
    taken at the inner minimiser) runs first.  Its iterate seeds an SLSQP
    solve of the epigraph form ``max t s.t. G_m(lam) >= t``, where each piece
    G_m is smooth with gradient equal to its divergence vector.

    Every piece is positively homogeneous in lam, so each gradient g_m gives
    the global cut ``F(lam) <= g_m . lam``.  The LP over all cuts collected is
    an upper bound on D*, and ``certificate_gap`` is that bound minus the best
    value found.  If the gap is still above ``target_gap``, supergradient
    steps resume until ``max_iter``.
    """
    etas = _check_member(structure, l, etas)
    K, M = structure.K, structure.M
    others = [j for j in range(M) if j != l]
    cuts: list[np.ndarray] = []
    found: list[tuple[float, np.ndarray]] = []
    cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
    it = 0

    def pieces(lam):
        nonlocal it
        lam = np.clip(np.asarray(lam, dtype=float), 0.0, None)
        key = lam.tobytes()
        if key not in cache:
            it += 1
            values, divs, _ = structure.alternative_values(l, lam, etas)
            values, divs = values[others], divs[others]
            for g in divs:
                if np.all(np.isfinite(g)):
                    cuts.append(g.copy())
            found.append((float(values.min()), lam.copy()))
            cache[key] = (values, divs)
        return cache[key]

    def upper_bound():
        G = np.array(cuts)
        c_obj = np.zeros(K + 1)
        c_obj[-1] = -1.0
        a_eq = np.ones((1, K + 1))
        a_eq[0, -1] = 0.0
        a_ub = np.hstack([-G, np.ones((G.shape[0], 1))])
        res = optimize.linprog(c_obj, A_ub=a_ub, b_ub=np.zeros(G.shape[0]), A_eq=a_eq, b_eq=[1.0],
                               bounds=[(0.0, 1.0)] * K + [(None, None)], method="highs",
                               options={"primal_feasibility_tolerance": 1e-10,
                                        "dual_feasibility_tolerance": 1e-10})
        if res.status != 0:
            raise NonConvergenceError(f"certificate LP failed: {res.message}")
        return float(-res.fun)

    def best():
        return max(v for v, _ in found)

    lam = np.full(K, 1.0 / K)
    for t in range(1, warm_start + 1):
        values, divs = pieces(lam)
        g = divs[int(np.argmin(values))]
        gn = np.linalg.norm(g)
        if gn == 0 or not np.isfinite(gn):
            break
        lam = project_simplex(lam + step / math.sqrt(t) * g / gn)

    x0 = max(found, key=lambda p: p[0])[1]
    z0 = np.append(x0, best())
    cons = [
        {"type": "ineq", "fun": lambda z: pieces(z[:K])[0] - z[K],
         "jac": lambda z: np.hstack([pieces(z[:K])[1], -np.ones((M - 1, 1))])},
        {"type": "eq", "fun": lambda z: np.sum(z[:K]) - 1.0,
         "jac": lambda z: np.append(np.ones(K), 0.0)[None, :]},
    ]
    optimize.minimize(
        lambda z: -z[K], z0, jac=lambda z: np.append(np.zeros(K), -1.0), method="SLSQP",
        bounds=[(0.0, 1.0)] * K + [(None, None)], constraints=cons,
        options={"maxiter": 200, "ftol": 1e-14},
    )
    # make sure the cut set contains gradients at the incumbent
    pieces(max(found, key=lambda p: p[0])[1])
    upper = upper_bound()
    t = warm_start
    while upper - best() > target_gap and it < max_iter:
        t += 1
        lam = max(found, key=lambda p: p[0])[1]
        values, divs = pieces(lam)
        g = divs[int(np.argmin(values))]
        lam = project_simplex(lam + step / math.sqrt(t) * g / max(np.linalg.norm(g), 1e-300))
        pieces(lam)
        if t % 50 == 0:
            upper = upper_bound()
    upper = min(upper, upper_bound())

    best_val = best()
    gap = upper - best_val
    if gap > gap_tol:
        raise NonConvergenceError(f"certificate gap {gap:.3g} after {it} iterations")
    near = [p for v, p in found if v >= best_val - 1e-12]
    lam_star = min(near, key=lambda p: float(p @ p))
    lam_star = lam_star / lam_star.sum()
    return OracleResult(lam_star, float(best_val), it, float(max(gap, 0.0)), "supergradient_slsqp")


def optimal_weights(structure: HypothesisStructure, l: int, etas, method: str = "auto") -> OracleResult:
    """lam*(etas) and D*(etas) for etas in Theta_l.

    ``method="auto"`` uses the closed one-dimensional reduction for odd-arm
    structures and the generic simplex solver otherwise.
    """
    if method == "auto":
        method = "golden" if isinstance(structure, OddArm) else "simplex"
    if method in ("golden", "brent"):
        if not isinstance(structure, OddArm):
            raise ValueError("the one-dimensional reduction applies to odd-arm structures only")
        return odd_arm_weights(structure, l, etas, method)
    if method == "simplex":
        return simplex_weights(structure, l, etas)
    raise ValueError(f"unknown method {method!r}")


def d_star(structure: HypothesisStructure, l: int, etas, method: str = "auto") -> float:
    return optimal_weights(structure, l, etas, method).d_star


# -- lower bound ---------------------------------------------------------


def binary_kl(alpha: float) -> float:
    """d_b(alpha || 1 - alpha)."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    return (1.0 - 2.0 * alpha) * (math.log1p(-alpha) - math.log(alpha))


def lower_bound_delay(alpha: float, d_star_value: float) -> float:
    """Lower bound on expected delay (and total cost) of any policy with error at most alpha."""
    if not d_star_value > 0:
        raise DomainError("D* must be positive")
    return binary_kl(alpha) / d_star_value


def asymptotic_lower_bound(log_L: float, d_star_value: float) -> float:
    """Leading-order bound log(1/alpha) / D* with alpha = exp(-log_L)."""
    if not d_star_value > 0:
        raise DomainError("D* must be positive")
    if log_L < 0:
        raise DomainError("log L must be non-negative")
    return float(log_L) / d_star_value
