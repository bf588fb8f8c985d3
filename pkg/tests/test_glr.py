import math

import numpy as np
import pytest
from scipy import integrate

from seqbandit import expfam
from seqbandit.expfam import ImproperPriorError
from seqbandit.glr import (
    PosteriorState, level_law, log_avg_likelihood, log_avg_likelihoods, log_marginal_normalizer, log_marginal_normalizers,
    log_ml_likelihood, log_ml_likelihoods, log_prob_top, z_lm, z_matrix, z_min, z_mins,
)
from seqbandit.hypotheses import BestArm, OddArm
from seqbandit.oracle import optimal_weights


def random_state(model, K, rng, n_max=30):
    st = PosteriorState.empty(model, K, n0=rng.uniform(0.5, 3.0), kappa_ref=None)
    etas = np.array([model.to_natural(model.default_reference_expectation())] * K)
    etas = etas + rng.normal(scale=0.1, size=etas.shape) * (model.d == 1)
    n = int(rng.integers(0, n_max))
    for _ in range(n):
        a = int(rng.integers(K))
        st.update(a, model.sample(etas[a], rng))
    return st


def test_update_and_replay():
    m = expfam.GaussianBothUnknown()
    rng = np.random.default_rng(30)
    st = PosteriorState.empty(m, 3)
    arms, xs = [], []
    for _ in range(100):
        a = int(rng.integers(3))
        x = rng.normal()
        before = st.copy()
        st.update(a, x)
        arms.append(a)
        xs.append(x)
        others = np.arange(3) != a
        np.testing.assert_array_equal(st.Y[others], before.Y[others])
        np.testing.assert_array_equal(st.N[others], before.N[others])
    direct = PosteriorState.from_observations(m, 3, arms, xs)
    np.testing.assert_allclose(st.Y, direct.Y, rtol=1e-12)
    np.testing.assert_array_equal(st.N, direct.N)
    assert st.n == direct.n == 100 == st.N.sum()
    u, n0 = st.posterior_hyper()
    np.testing.assert_allclose(u, st.Y + st.upsilon)
    np.testing.assert_allclose(n0, st.N + st.n0)


def test_first_update():
    m = expfam.GaussianKnownVariance(1.0)
    st = PosteriorState.empty(m, 3).update(0, 2.5)
    assert st.N.tolist() == [1, 0, 0] and st.Y[0, 0] == 2.5 and st.n == 1


def test_default_priors_are_proper():
    for m in [expfam.GaussianKnownVariance(1.0), expfam.GaussianKnownMean(0.0), expfam.GaussianBothUnknown(),
              expfam.Poisson(), expfam.Bernoulli()]:
        PosteriorState.empty(m, 3)
    with pytest.raises(ImproperPriorError):
        PosteriorState.empty(expfam.Poisson(), 3, kappa_ref=[0.0])


def test_odd_arm_normalizer_factorises():
    m = expfam.GaussianKnownVariance(1.0)
    s = OddArm(m, 3)
    ups = np.array([[0.2], [-0.4], [0.7]])
    n0 = np.array([1.0, 2.0, 1.5])
    got = log_marginal_normalizer(s, 0, ups, n0)
    # two-dimensional quadrature over (theta, theta')
    f = lambda tp, t: math.exp(t * ups[0, 0] - n0[0] * t * t / 2 + tp * (ups[1, 0] + ups[2, 0]) - (n0[1] + n0[2]) * tp * tp / 2)
    ref = math.log(integrate.dblquad(f, -30, 30, -30, 30, epsrel=1e-11)[0])
    assert got == pytest.approx(ref, abs=1e-8)
    assert log_marginal_normalizer(OddArm(m, 3), 0, np.zeros((3, 1)), 1.0) == pytest.approx(
        0.5 * math.log(2 * math.pi) + 0.5 * math.log(2 * math.pi / 2), abs=1e-12)


def test_normalizer_decreases_in_n0():
    rng = np.random.default_rng(31)
    m = expfam.GaussianKnownVariance(1.0)
    for K, S in [(3, OddArm), (3, BestArm)]:
        s = S(m, K)
        for _ in range(10):
            ups = rng.normal(size=(K, 1)) * 0.3
            n0 = rng.uniform(1, 3, K)
            i = int(rng.integers(K))
            bumped = n0.copy()
            bumped[i] += 0.5
            assert log_marginal_normalizers(s, ups, bumped)[0] < log_marginal_normalizers(s, ups, n0)[0]


def test_best_arm_normalizer_vs_2d_quadrature():
    m = expfam.GaussianKnownVariance(1.0)
    s = BestArm(m, 2)
    ups = np.array([[0.3], [-0.2]])
    n0 = np.array([2.0, 3.0])
    f = lambda y, x: math.exp(x * ups[0, 0] - n0[0] * x * x / 2 + y * ups[1, 0] - n0[1] * y * y / 2)
    ref = math.log(integrate.dblquad(f, -20, 20, -20, lambda x: x, epsrel=1e-11)[0])
    assert log_marginal_normalizer(s, 0, ups, n0) == pytest.approx(ref, abs=1e-7)


def test_best_arm_normalizer_vs_monte_carlo():
    p = expfam.Poisson()
    s = BestArm(p, 3)
    ups = np.array([[5.0], [3.0], [4.0]])
    n0 = np.array([2.0, 1.0, 3.0])
    got = log_marginal_normalizers(s, ups, n0) - float(np.sum(p.log_prior_normalizer(ups, n0)))
    rng = np.random.default_rng(32)
    draws = rng.gamma(ups[:, 0], 1 / n0, size=(10**6, 3))
    freq = np.bincount(draws.argmax(axis=1), minlength=3) / 1e6
    se = np.sqrt(freq * (1 - freq) / 1e6)
    assert np.all(np.abs(np.exp(got) - freq) < 4 * se)
    assert np.exp(got).sum() == pytest.approx(1.0, abs=1e-7)


def test_best_arm_two_parameter_probabilities_sum_to_one():
    g = expfam.GaussianBothUnknown()
    s = BestArm(g, 3, c=[1.0, 0.5])
    ups = np.array([[0.5, 2.0], [0.0, 1.5], [1.0, 4.0]])
    n0 = np.array([2.0, 1.0, 3.0])
    got = log_marginal_normalizers(s, ups, n0) - float(np.sum(g.log_prior_normalizer(ups, n0)))
    assert np.exp(got).sum() == pytest.approx(1.0, abs=1e-4)


def test_avg_likelihood_empty_state_is_zero():
    s = OddArm(expfam.Poisson(), 4)
    st = PosteriorState.empty(s.model, 4)
    np.testing.assert_array_equal(log_avg_likelihoods(s, st), 0.0)
    np.testing.assert_array_equal(log_ml_likelihoods(s, st), 0.0)
    assert z_lm(s, 0, 1, st) == 0.0


@pytest.mark.parametrize("model,x", [(expfam.GaussianKnownMean(0.0), 1.3), (expfam.Poisson(), 4.0),
                                     (expfam.Bernoulli(), 1.0), (expfam.GaussianKnownVariance(2.0), -0.7)],
                         ids=lambda v: getattr(v, "name", str(v)))
def test_avg_likelihood_one_observation_quadrature(model, x):
    s = OddArm(model, 3)
    st = PosteriorState.empty(model, 3, n0=1.5)
    st.update(0, x)
    T = float(model.suff_stat(x)[0])
    ups, n0 = float(st.upsilon[0, 0]), float(st.n0[0])
    log_z = float(model.log_prior_normalizer([ups], n0))
    lo, hi = model.natural_bounds[0]

    def integrand(e):
        return math.exp(e * (T + ups) - (n0 + 1.0) * float(model._A(np.array([e]))) - log_z)

    with np.errstate(over="ignore"):
        ref = math.log(integrate.quad(integrand, lo, hi, epsabs=0, epsrel=1e-11, limit=200)[0])
    assert log_avg_likelihood(s, 0, st) == pytest.approx(ref, abs=1e-6)


def test_avg_likelihood_order_invariant():
    m = expfam.Poisson()
    s = OddArm(m, 3)
    rng = np.random.default_rng(33)
    arms = rng.integers(0, 3, 40)
    xs = rng.poisson(2.0, 40).astype(float)
    perm = rng.permutation(40)
    a = PosteriorState.from_observations(m, 3, arms, xs)
    b = PosteriorState.from_observations(m, 3, arms[perm], xs[perm])
    np.testing.assert_allclose(log_avg_likelihoods(s, a), log_avg_likelihoods(s, b), atol=1e-10)


def test_ml_likelihood_properties():
    m = expfam.GaussianKnownVariance(1.0)
    s = OddArm(m, 3)
    st = PosteriorState.from_observations(m, 3, [0, 0, 1, 1, 2, 2, 1], [-0.5, 0.2, 1.1, 0.9, 1.3, 0.7, 1.0])
    kap = st.kappa_hat()
    l_hat = int(np.argmax(log_ml_likelihoods(s, st)))
    assert log_ml_likelihood(s, l_hat, st) == pytest.approx(float(np.sum(st.N * m.conjugate_dual(kap))), abs=1e-12)
    for j in range(3):
        assert log_ml_likelihood(s, j, st) <= log_ml_likelihood(s, l_hat, st) + 1e-12
    doubled = st.copy()
    doubled.Y *= 2
    doubled.N *= 2
    doubled.n *= 2
    np.testing.assert_allclose(log_ml_likelihoods(s, doubled), 2 * log_ml_likelihoods(s, st), atol=1e-12)


def test_z_antisymmetry_random_states():
    rng = np.random.default_rng(34)
    worst = -np.inf
    for model in [expfam.GaussianKnownVariance(1.0), expfam.Poisson(), expfam.Bernoulli(), expfam.GaussianKnownMean(0.0)]:
        s = OddArm(model, 4)
        for _ in range(250):
            Z = z_matrix(s, random_state(model, 4, rng))
            worst = max(worst, np.nanmax(Z + Z.T))
    assert worst <= 1e-9


def test_best_arm_z_antisymmetric_without_nan(family):
    rng = np.random.default_rng(38)
    s = BestArm(family, 3)
    off = ~np.eye(3, dtype=bool)
    for _ in range(15):
        Z = z_matrix(s, random_state(family, 3, rng))
        # -inf is legitimate when a maximised likelihood is unbounded; nan never is
        assert not np.any(np.isnan(Z[off]))
        assert np.max(Z[off] + Z.T[off]) <= 1e-9


def test_best_arm_two_parameter_single_observations():
    m = expfam.GaussianBothUnknown()
    s = BestArm(m, 3)
    st = PosteriorState.from_observations(m, 3, [0, 1, 2, 0], [0.3, -0.4, 1.2, 0.9])
    Z = z_matrix(s, st)
    off = ~np.eye(3, dtype=bool)
    assert not np.any(np.isnan(Z[off]))


def test_heavy_tailed_prior_levels_are_finite():
    # Beta(0.47, 0.47) in logit space has exponential tails where expit rounds to 1
    m = expfam.Bernoulli()
    laws = [level_law(m, np.array([0.47]), 0.94, np.array([1.0]))] * 3
    vals = [log_prob_top(laws, l) for l in range(3)]
    np.testing.assert_allclose(vals, math.log(1 / 3), atol=1e-7)


def test_z_functions_consistent():
    m = expfam.GaussianKnownVariance(1.0)
    s = OddArm(m, 4)
    st = random_state(m, 4, np.random.default_rng(35), n_max=60)
    Z = z_matrix(s, st)
    assert z_lm(s, 1, 2, st) == pytest.approx(Z[1, 2])
    assert z_min(s, 3, st) == pytest.approx(np.nanmin(Z[3]))
    np.testing.assert_allclose(z_mins(s, st), np.nanmin(Z, axis=1))
    with pytest.raises(ValueError):
        z_lm(s, 1, 1, st)


def test_incremental_matches_scratch():
    m = expfam.GaussianKnownVariance(1.0)
    s = OddArm(m, 8)
    etas = np.ones((8, 1))
    etas[0] = 0.0
    rng = np.random.default_rng(36)
    st = PosteriorState.empty(m, 8)
    arms, xs = [], []
    for _ in range(500):
        a = int(rng.integers(8))
        x = float(m.sample(etas[a], rng))
        st.update(a, x)
        arms.append(a)
        xs.append(x)
        scratch = PosteriorState.from_observations(m, 8, arms, xs)
        np.testing.assert_allclose(z_matrix(s, st), z_matrix(s, scratch), atol=1e-9, rtol=0)


def test_drift_under_target_sampling():
    m = expfam.GaussianKnownVariance(1.0)
    s = OddArm(m, 8)
    etas = np.ones((8, 1))
    etas[0] = 0.0
    r = optimal_weights(s, 0, etas)
    n = 10_000
    counts = np.floor(r.lam_star * n).astype(int)
    counts[0] += n - counts.sum()
    rng = np.random.default_rng(37)
    ratios = []
    for _ in range(5):
        arms = np.repeat(np.arange(8), counts)
        xs = rng.normal(etas[arms, 0], 1.0)
        st = PosteriorState.from_observations(m, 8, arms, xs)
        ratios.append(z_min(s, 0, st) / n)
    assert abs(np.median(ratios) - r.d_star) < 0.1 * r.d_star
