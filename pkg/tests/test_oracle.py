import math
import time

import numpy as np
import pytest
from scipy import optimize

from seqbandit import expfam
from seqbandit.expfam import DomainError
from seqbandit.hypotheses import BestArm, OddArm
from seqbandit.oracle import (
    NonConvergenceError, alternative_value, asymptotic_lower_bound, binary_kl, golden_section_max,
    lower_bound_delay, odd_arm_phi, odd_arm_weights, optimal_weights, project_simplex, simplex_weights,
)

from conftest import instance, random_naturals

# Unit-variance Gaussian, odd mean 0 vs 1, K = 8: Phi(x) = 3x(1 - x) / (6 + x),
# maximised at x = sqrt(42) - 6.
MEAN_LAM = math.sqrt(42.0) - 6.0
MEAN_DSTAR = 3 * MEAN_LAM * (1 - MEAN_LAM) / (6 + MEAN_LAM)

# Variance-shift and joint-shift instances (configs/odd_variance.json,
# odd_mean_variance.json) computed by direct
# Nelder-Mead over the symmetric alternative (independent of the 1-D reduction).
VARIANCE_DSTAR = 0.1417518121
JOINT_DSTAR = 0.1693739036

# Three-arm best-arm Gaussian instance (means 1, 0.5, 0), by nested SLSQP /
# Nelder-Mead brute force over the simplex.
BEST3_DSTAR = 0.0291673742515586
BEST3_LAM = np.array([0.46906758, 0.46431261, 0.0666198])


def mean_instance():
    m = expfam.GaussianKnownVariance(1.0)
    etas = np.ones((8, 1))
    etas[0] = 0.0
    return OddArm(m, 8), etas


def test_analytic_mean_shift_reduction():
    s, etas = mean_instance()
    for x in np.linspace(0.01, 0.99, 25):
        assert odd_arm_phi(s.model, 8, x, etas[0], etas[1]) == pytest.approx(3 * x * (1 - x) / (6 + x), abs=1e-14)


@pytest.mark.parametrize("method", ["golden", "brent", "simplex"])
def test_mean_shift_optimum_all_methods(method):
    s, etas = mean_instance()
    r = optimal_weights(s, 0, etas, method)
    assert r.d_star == pytest.approx(MEAN_DSTAR, abs=1e-9)
    assert r.lam_star[0] == pytest.approx(MEAN_LAM, abs=1e-6)
    np.testing.assert_allclose(r.lam_star[1:], (1 - MEAN_LAM) / 7, atol=1e-6)
    assert r.certificate_gap < 1e-6


@pytest.mark.parametrize("name,value", [("odd_variance", VARIANCE_DSTAR), ("odd_mean_variance", JOINT_DSTAR)])
def test_variance_and_joint_recomputed_values(name, value):
    s, etas = instance(name)
    assert optimal_weights(s, 0, etas).d_star == pytest.approx(value, abs=1e-9)
    assert simplex_weights(s, 0, etas).d_star == pytest.approx(value, abs=1e-8)


def test_variance_direct_infimum_route():
    s, etas = instance("odd_variance")
    model = s.model
    lam = optimal_weights(s, 0, etas).lam_star

    # alternative in Theta_1 by direct search over (theta for arm 1, theta' for the rest)
    def obj(x):
        e = np.full((8, 1), x[1])
        e[1] = x[0]
        if np.any(e >= 0):
            return 1e9
        return float(np.sum(lam * model._kl(etas, e)))

    res = optimize.minimize(obj, [-0.5, -0.2], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
    assert res.fun == pytest.approx(VARIANCE_DSTAR, abs=1e-8)


def test_reduction_and_generic_solver_agree_on_random_instances():
    rng = np.random.default_rng(20)
    families = [expfam.GaussianKnownVariance(1.0), expfam.GaussianKnownMean(0.0), expfam.GaussianBothUnknown(),
                expfam.Poisson(), expfam.Bernoulli()]
    for i in range(20):
        model = families[i % len(families)]
        K = int(rng.integers(3, 7))
        pair = random_naturals(model, rng, 2)
        etas = np.tile(pair[1], (K, 1))
        l = int(rng.integers(K))
        etas[l] = pair[0]
        s = OddArm(model, K)
        a = optimal_weights(s, l, etas, "golden")
        b = simplex_weights(s, l, etas)
        assert abs(a.d_star - b.d_star) < 1e-5, (model.name, K, pair)


def test_concavity_certificate():
    s, etas = mean_instance()
    r = optimal_weights(s, 0, etas)
    rng = np.random.default_rng(21)
    for lam in rng.dirichlet(np.ones(8), size=1000):
        assert alternative_value(s, 0, lam, etas) <= r.d_star + 1e-8


def test_best_arm_two_gaussians_closed_form():
    m = expfam.GaussianKnownVariance(1.0)
    s = BestArm(m, 2)
    r = optimal_weights(s, 0, [[1.0], [-1.0]])
    # D* = gap^2 / 8 at equal weights
    assert r.d_star == pytest.approx(0.5, abs=1e-9)
    np.testing.assert_allclose(r.lam_star, [0.5, 0.5], atol=1e-6)


def test_best_arm_three_gaussians_brute_force():
    m = expfam.GaussianKnownVariance(1.0)
    s = BestArm(m, 3)
    etas = [[1.0], [0.5], [0.0]]
    r = optimal_weights(s, 0, etas)
    assert r.d_star == pytest.approx(BEST3_DSTAR, abs=1e-8)
    np.testing.assert_allclose(r.lam_star, BEST3_LAM, atol=1e-5)
    rng = np.random.default_rng(22)
    for lam in rng.dirichlet(np.ones(3), size=100):
        assert alternative_value(s, 0, lam, etas) <= r.d_star + 1e-6


def test_non_member_configuration_rejected():
    s, etas = mean_instance()
    with pytest.raises(DomainError):
        optimal_weights(s, 1, etas)
    with pytest.raises(DomainError):
        optimal_weights(s, 0, np.ones((8, 1)))


def test_non_convergence_reported():
    m = expfam.GaussianKnownVariance(1.0)
    s = BestArm(m, 3)
    with pytest.raises(NonConvergenceError):
        simplex_weights(s, 0, [[1.0], [0.5], [0.0]], max_iter=3, warm_start=1, gap_tol=1e-30, target_gap=1e-30)


def test_odd_arm_runtime():
    s, etas = mean_instance()
    t = time.perf_counter()
    odd_arm_weights(s, 0, etas, "golden")
    assert time.perf_counter() - t < 1.0


def test_project_simplex():
    rng = np.random.default_rng(23)
    for _ in range(50):
        v = rng.normal(size=6) * 3
        p = project_simplex(v)
        assert p.sum() == pytest.approx(1.0) and np.all(p >= 0)
        # optimality: no simplex vertex mix is closer
        q = rng.dirichlet(np.ones(6))
        assert np.sum((v - p) ** 2) <= np.sum((v - q) ** 2) + 1e-12


def test_golden_section():
    x, fx, _ = golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-8)


def test_lower_bounds():
    assert binary_kl(0.5) == 0.0
    a = math.exp(-5)
    assert binary_kl(a) == pytest.approx((1 - 2 * a) * math.log((1 - a) / a))
    assert lower_bound_delay(a, MEAN_DSTAR) == pytest.approx(binary_kl(a) / MEAN_DSTAR)
    assert asymptotic_lower_bound(5.0, 0.1156) == pytest.approx(43.25, abs=0.01)
    assert asymptotic_lower_bound(0.0, 0.1156) == 0.0
    with pytest.raises(DomainError):
        binary_kl(1.0)
    with pytest.raises(DomainError):
        asymptotic_lower_bound(-1.0, 0.1)
