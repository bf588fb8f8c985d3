"""Exponential families in natural and expectation coordinates.

Every family exposes the same surface: log partition ``A``, its convex
conjugate ``F``, the two gradient maps between natural (``eta``) and
expectation (``kappa``) parameters, the Hessian of ``A``, sufficient
statistics, sampling and KL divergences.  Parameters are numpy arrays whose
trailing axis has length ``d`` (1 or 2); all methods broadcast over leading
axes so a whole bandit (shape ``(K, d)``) can be processed at once.

The conjugate-prior normaliser and the law of the natural parameter under
the normalised prior live here as well, since both are family specific
closed forms.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special, stats

BOUNDARY_TOL = 1e-12

_GL_NODES, _GL_WEIGHTS = leggauss(64)
# map [-1, 1] to [0, 1]
_GL_T = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


class DomainError(ValueError):
    """A parameter lies outside the domain of the family."""


class ImproperPriorError(ValueError):
    """Conjugate prior hyperparameters do not define a finite measure."""


class ExpFamily(ABC):
    """Base class for the implemented one-parameter-vector families.

    Subclasses define ``d``, ``natural_bounds`` (open interval per component)
    and the closed forms.  Instances are immutable.
    """

    d: int = 1
    name: str = ""
    natural_bounds: tuple[tuple[float, float], ...] = ((-np.inf, np.inf),)

    # -- domains ---------------------------------------------------------

    def in_natural_domain(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        ok = np.ones(eta.shape[:-1], dtype=bool)
        for k, (lo, hi) in enumerate(self.natural_bounds):
            ok &= (eta[..., k] > lo + BOUNDARY_TOL) & (eta[..., k] < hi - BOUNDARY_TOL)
        return ok

    @abstractmethod
    def in_expectation_domain(self, kappa) -> np.ndarray:
        ...

    def check_natural(self, eta) -> np.ndarray:
        eta = self._as_param(eta)
        if not np.all(self.in_natural_domain(eta)):
            raise DomainError(f"{self.name}: natural parameter {eta.tolist()} outside domain")
        return eta

    def check_expectation(self, kappa) -> np.ndarray:
        kappa = self._as_param(kappa)
        if not np.all(self.in_expectation_domain(kappa)):
            raise DomainError(f"{self.name}: expectation parameter {kappa.tolist()} outside domain")
        return kappa

    def _as_param(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.ndim == 0:
            p = p.reshape(1)
        if p.shape[-1] != self.d:
            raise DomainError(f"{self.name}: expected trailing dimension {self.d}, got {p.shape}")
        return p

    # -- public API (validated) -------------------------------------------

    def log_partition(self, eta) -> np.ndarray:
        return self._A(self.check_natural(eta))

    def to_expectation(self, eta) -> np.ndarray:
        return self._kappa(self.check_natural(eta))

    def to_natural(self, kappa) -> np.ndarray:
        return self._eta(self.check_expectation(kappa))

    def conjugate_dual(self, kappa) -> np.ndarray:
        """F(kappa) = eta(kappa).kappa - A(eta(kappa))."""
        return self._F(self.check_expectation(kappa))

    def hessian(self, eta) -> np.ndarray:
        """Hessian of A at ``eta``, i.e. the covariance of T(x); shape (..., d, d)."""
        return self._hess(self.check_natural(eta))

    def kl(self, eta1, eta2) -> np.ndarray:
        """D(eta1 || eta2) from natural parameters."""
        eta1 = self.check_natural(eta1)
        eta2 = self.check_natural(eta2)
        return self._kl(eta1, eta2)

    def kl_expectation(self, eta1, eta2) -> np.ndarray:
        """Same divergence written through the conjugate dual F."""
        eta1 = self.check_natural(eta1)
        eta2 = self.check_natural(eta2)
        k1, k2 = self._kappa(eta1), self._kappa(eta2)
        return np.sum((k2 - k1) * eta2, axis=-1) + self._F(k1) - self._F(k2)

    def kl_taylor(self, eta1, eta2) -> np.ndarray:
        """Integral form of the Taylor remainder, 64-point Gauss-Legendre in t."""
        eta1 = self.check_natural(eta1)
        eta2 = self.check_natural(eta2)
        delta = eta2 - eta1
        pts = eta1[..., None, :] + _GL_T[:, None] * delta[..., None, :]
        hess = self._hess(pts)  # (..., 64, d, d)
        quad = np.einsum("...i,...tij,...j->...t", delta, hess, delta)
        return np.sum(_GL_W * (1.0 - _GL_T) * quad, axis=-1)

    def kl_from_expectation(self, kappa1, kappa2) -> np.ndarray:
        """D(eta(kappa1) || eta(kappa2)) without a round trip through A."""
        eta2 = self._eta(kappa2)
        return np.sum((kappa2 - kappa1) * eta2, axis=-1) + self._F(kappa1) - self._F(kappa2)

    # -- closed forms, unvalidated, broadcasting ------------------------

    @abstractmethod
    def _A(self, eta): ...

    @abstractmethod
    def _kappa(self, eta): ...

    @abstractmethod
    def _eta(self, kappa): ...

    @abstractmethod
    def _F(self, kappa): ...

    @abstractmethod
    def _hess(self, eta): ...

    def _kl(self, eta1, eta2):
        return np.sum((eta1 - eta2) * self._kappa(eta1), axis=-1) - self._A(eta1) + self._A(eta2)

    def dual_closure(self, kappa) -> np.ndarray:
        """F extended by its limits to the closure of the expectation domain.

        Returns ``+inf`` where the supremum of ``eta.kappa - A(eta)`` is
        unbounded (e.g. zero empirical variance).
        """
        return self._F(kappa)

    # -- data -----------------------------------------------------------

    @abstractmethod
    def suff_stat(self, x) -> np.ndarray:
        """T(x) with a trailing axis of length d."""

    @abstractmethod
    def sample(self, eta, rng: np.random.Generator, size=None):
        """Draw observations x at natural parameter ``eta`` (a single arm)."""

    # -- conjugate prior --------------------------------------------------

    @abstractmethod
    def log_prior_normalizer(self, upsilon, n0) -> np.ndarray:
        """log of  int exp(eta.upsilon - n0 A(eta)) d eta  over the natural domain."""

    @abstractmethod
    def prior_is_proper(self, upsilon, n0) -> np.ndarray:
        ...

    @abstractmethod
    def default_reference_expectation(self) -> np.ndarray:
        """Expectation parameter of the default prior pseudo-observation."""

    def natural_law(self, upsilon, n0):
        """Law of eta under the normalised conjugate prior (d = 1 families).

        Returns a :class:`ScalarLaw`.
        """
        raise NotImplementedError(f"{self.name} has no scalar natural-parameter law")

    def interior_expectation(self, kappa) -> np.ndarray:
        """Clip an empirical expectation parameter into the open domain."""
        return np.asarray(kappa, dtype=float)

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self) -> int:
        return hash((type(self).__name__, tuple(sorted(self.__dict__.items()))))


class ScalarLaw:
    """Law of a scalar ``y = sign * g(X)`` with ``X`` a frozen scipy law and
    ``g`` strictly increasing.  Only what the truncated normaliser needs:
    ``logpdf``, ``logcdf``, ``ppf`` and ``rvs``.  ``log_density``, if given,
    is the log density of ``g(X)`` written directly in y, used where
    ``g_inv`` saturates in floating point.
    """

    def __init__(self, base, g, g_inv, log_g_inv_prime, sign: float = 1.0, log_density=None):
        self.base = base
        self.g = g
        self.g_inv = g_inv
        self.log_g_inv_prime = log_g_inv_prime
        self.sign = 1.0 if sign > 0 else -1.0
        self.log_density = log_density

    def scaled(self, c: float) -> "ScalarLaw":
        """Law of ``c * y``."""
        c = float(c)
        if c == 0.0:
            raise ValueError("direction must be non-zero")
        s = self.sign * np.sign(c)
        a = abs(c)
        g, g_inv, lgp, ld = self.g, self.g_inv, self.log_g_inv_prime, self.log_density
        return ScalarLaw(
            self.base,
            lambda x: a * g(x),
            lambda y: g_inv(y / a),
            lambda y: lgp(y / a) - math.log(a),
            s,
            None if ld is None else (lambda y: ld(y / a) - math.log(a)),
        )

    def logpdf(self, y):
        y = np.asarray(y, dtype=float) * self.sign
        if self.log_density is not None:
            with np.errstate(all="ignore"):
                out = self.log_density(y)
            return np.where(np.isnan(out), -np.inf, out)
        with np.errstate(all="ignore"):
            x = self.g_inv(y)
            out = self.base.logpdf(x) + self.log_g_inv_prime(y)
        return np.where(np.isfinite(x), out, -np.inf)

    def logcdf(self, y):
        y = np.asarray(y, dtype=float) * self.sign
        with np.errstate(all="ignore"):
            x = self.g_inv(y)
            return self.base.logcdf(x) if self.sign > 0 else self.base.logsf(x)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        if self.sign > 0:
            return self.g(self.base.ppf(q))
        return -self.g(self.base.isf(q))

    def rvs(self, size, rng):
        return self.sign * self.g(self.base.rvs(size=size, random_state=rng))


def _identity(x):
    return x


def _zero(y):
    return np.zeros_like(np.asarray(y, dtype=float))


class GaussianKnownVariance(ExpFamily):
    """N(mu, sigma2) with sigma2 fixed: eta = mu / sigma2, T(x) = x."""

    d = 1
    name = "gaussian_known_variance"
    natural_bounds = ((-np.inf, np.inf),)

    def __init__(self, sigma2: float = 1.0):
        if not sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        self.sigma2 = float(sigma2)

    def __repr__(self):
        return f"GaussianKnownVariance(sigma2={self.sigma2})"

    def in_expectation_domain(self, kappa):
        kappa = np.asarray(kappa, dtype=float)
        return np.isfinite(kappa[..., 0])

    def _A(self, eta):
        return 0.5 * self.sigma2 * eta[..., 0] ** 2

    def _kappa(self, eta):
        return self.sigma2 * eta

    def _eta(self, kappa):
        return kappa / self.sigma2

    def _F(self, kappa):
        return kappa[..., 0] ** 2 / (2.0 * self.sigma2)

    def _hess(self, eta):
        return np.full(eta.shape + (1,), self.sigma2)

    def _kl(self, eta1, eta2):
        return 0.5 * self.sigma2 * (eta1[..., 0] - eta2[..., 0]) ** 2

    def suff_stat(self, x):
        return np.asarray(x, dtype=float)[..., None]

    def sample(self, eta, rng, size=None):
        eta = np.asarray(eta, dtype=float).reshape(-1)
        return rng.normal(self.sigma2 * eta[0], math.sqrt(self.sigma2), size=size)

    def log_prior_normalizer(self, upsilon, n0):
        u = np.asarray(upsilon, dtype=float)[..., 0]
        n0 = np.asarray(n0, dtype=float)
        if np.any(n0 <= 0):
            raise ImproperPriorError("n0 must be positive")
        s = n0 * self.sigma2
        return 0.5 * np.log(2.0 * np.pi / s) + u**2 / (2.0 * s)

    def prior_is_proper(self, upsilon, n0):
        return np.asarray(n0, dtype=float) > 0

    def default_reference_expectation(self):
        return np.zeros(1)

    def natural_law(self, upsilon, n0):
        u = float(np.asarray(upsilon, dtype=float).reshape(-1)[0])
        s = float(n0) * self.sigma2
        base = stats.norm(loc=u / s, scale=1.0 / math.sqrt(s))
        return ScalarLaw(base, _identity, _identity, _zero)


class GaussianKnownMean(ExpFamily):
    """N(mu, sigma2) with mu fixed: eta = -1 / (2 sigma2), T(x) = (x - mu)^2."""

    d = 1
    name = "gaussian_known_mean"
    natural_bounds = ((-np.inf, 0.0),)

    def __init__(self, mu: float = 0.0):
        self.mu = float(mu)

    def __repr__(self):
        return f"GaussianKnownMean(mu={self.mu})"

    def in_expectation_domain(self, kappa):
        kappa = np.asarray(kappa, dtype=float)
        return (kappa[..., 0] > BOUNDARY_TOL) & np.isfinite(kappa[..., 0])

    def _A(self, eta):
        return -0.5 * np.log(-2.0 * eta[..., 0])

    def _kappa(self, eta):
        return -0.5 / eta

    def _eta(self, kappa):
        return -0.5 / kappa

    def _F(self, kappa):
        return -0.5 - 0.5 * np.log(kappa[..., 0])

    def dual_closure(self, kappa):
        k = np.asarray(kappa, dtype=float)[..., 0]
        with np.errstate(divide="ignore"):
            return np.where(k > 0, -0.5 - 0.5 * np.log(np.where(k > 0, k, 1.0)), np.inf)

    def _hess(self, eta):
        return (0.5 / eta**2)[..., None]

    def suff_stat(self, x):
        return ((np.asarray(x, dtype=float) - self.mu) ** 2)[..., None]

    def sample(self, eta, rng, size=None):
        eta = np.asarray(eta, dtype=float).reshape(-1)
        return rng.normal(self.mu, math.sqrt(-0.5 / eta[0]), size=size)

    def log_prior_normalizer(self, upsilon, n0):
        u = np.asarray(upsilon, dtype=float)[..., 0]
        n0 = np.asarray(n0, dtype=float)
        if np.any(u <= 0) or np.any(n0 <= 0):
            raise ImproperPriorError("gaussian_known_mean prior needs upsilon > 0 and n0 > 0")
        a = 0.5 * n0 + 1.0
        return 0.5 * n0 * math.log(2.0) + special.gammaln(a) - a * np.log(u)

    def prior_is_proper(self, upsilon, n0):
        u = np.asarray(upsilon, dtype=float)[..., 0]
        return (u > 0) & (np.asarray(n0, dtype=float) > 0)

    def default_reference_expectation(self):
        return np.ones(1)

    def natural_law(self, upsilon, n0):
        # -eta ~ Gamma(n0/2 + 1, rate upsilon)
        u = float(np.asarray(upsilon, dtype=float).reshape(-1)[0])
        base = stats.gamma(a=0.5 * float(n0) + 1.0, scale=1.0 / u)
        return ScalarLaw(base, _identity, _identity, _zero, sign=-1.0)

    def interior_expectation(self, kappa):
        return np.maximum(np.asarray(kappa, dtype=float), 1e-300)


class GaussianBothUnknown(ExpFamily):
    """N(mu, sigma2), both unknown: eta = (mu/sigma2, -1/(2 sigma2)), T(x) = (x, x^2)."""

    d = 2
    name = "gaussian"
    natural_bounds = ((-np.inf, np.inf), (-np.inf, 0.0))

    def __repr__(self):
        return "GaussianBothUnknown()"

    def in_expectation_domain(self, kappa):
        kappa = np.asarray(kappa, dtype=float)
        var = kappa[..., 1] - kappa[..., 0] ** 2
        return (var > BOUNDARY_TOL) & np.isfinite(var)

    def _A(self, eta):
        e1, e2 = eta[..., 0], eta[..., 1]
        return -(e1**2) / (4.0 * e2) - 0.5 * np.log(-2.0 * e2)

    def _kappa(self, eta):
        e1, e2 = eta[..., 0], eta[..., 1]
        mu = -e1 / (2.0 * e2)
        var = -0.5 / e2
        return np.stack([mu, mu**2 + var], axis=-1)

    def _eta(self, kappa):
        mu = kappa[..., 0]
        var = kappa[..., 1] - mu**2
        return np.stack([mu / var, -0.5 / var], axis=-1)

    def _F(self, kappa):
        var = kappa[..., 1] - kappa[..., 0] ** 2
        return -0.5 - 0.5 * np.log(var)

    def dual_closure(self, kappa):
        kappa = np.asarray(kappa, dtype=float)
        var = kappa[..., 1] - kappa[..., 0] ** 2
        # relative floor: a variance this small is zero up to rounding of Y2/N - (Y1/N)^2
        floor = 1e-12 * np.maximum(kappa[..., 1], 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(var > floor, -0.5 - 0.5 * np.log(np.where(var > floor, var, 1.0)), np.inf)

    def _hess(self, eta):
        e1, e2 = eta[..., 0], eta[..., 1]
        mu = -e1 / (2.0 * e2)
        var = -0.5 / e2
        h11 = var
        h12 = 2.0 * mu * var
        h22 = 2.0 * var**2 + 4.0 * mu**2 * var
        return np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)

    def suff_stat(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([x, x * x], axis=-1)

    def sample(self, eta, rng, size=None):
        k = self._kappa(np.asarray(eta, dtype=float).reshape(2))
        return rng.normal(k[0], math.sqrt(k[1] - k[0] ** 2), size=size)

    def _prior_rate(self, upsilon, n0):
        u = np.asarray(upsilon, dtype=float)
        return u[..., 1] - u[..., 0] ** 2 / np.asarray(n0, dtype=float)

    def log_prior_normalizer(self, upsilon, n0):
        n0 = np.asarray(n0, dtype=float)
        if np.any(n0 <= 0):
            raise ImproperPriorError("n0 must be positive")
        b = self._prior_rate(upsilon, n0)
        if np.any(b <= 0):
            raise ImproperPriorError("gaussian prior needs upsilon2 > upsilon1^2 / n0")
        a = 0.5 * (n0 + 3.0)
        return 0.5 * np.log(4.0 * np.pi / n0) + 0.5 * n0 * math.log(2.0) + special.gammaln(a) - a * np.log(b)

    def prior_is_proper(self, upsilon, n0):
        n0 = np.asarray(n0, dtype=float)
        return (n0 > 0) & (self._prior_rate(upsilon, np.where(n0 > 0, n0, 1.0)) > 0)

    def default_reference_expectation(self):
        return np.array([0.0, 1.0])

    def prior_components(self, upsilon, n0):
        """Under the normalised prior, u = -eta2 ~ Gamma(shape, rate) and
        eta1 | u ~ N(slope * u, var_slope * u).  Returns (shape, rate, slope, var_slope)."""
        u = np.asarray(upsilon, dtype=float).reshape(2)
        n0 = float(n0)
        return 0.5 * (n0 + 3.0), float(self._prior_rate(u, n0)), 2.0 * u[0] / n0, 2.0 / n0

    def interior_expectation(self, kappa):
        kappa = np.array(kappa, dtype=float)
        floor = 1e-12 * np.maximum(np.abs(kappa[..., 1]), 1.0)
        kappa[..., 1] = np.maximum(kappa[..., 1], kappa[..., 0] ** 2 + floor)
        return kappa


class Poisson(ExpFamily):
    """Poisson(rate): eta = log rate, T(x) = x."""

    d = 1
    name = "poisson"
    natural_bounds = ((-np.inf, np.inf),)

    def in_expectation_domain(self, kappa):
        kappa = np.asarray(kappa, dtype=float)
        return (kappa[..., 0] > BOUNDARY_TOL) & np.isfinite(kappa[..., 0])

    def _A(self, eta):
        return np.exp(eta[..., 0])

    def _kappa(self, eta):
        return np.exp(eta)

    def _eta(self, kappa):
        return np.log(kappa)

    def _F(self, kappa):
        k = kappa[..., 0]
        return k * np.log(k) - k

    def dual_closure(self, kappa):
        k = np.asarray(kappa, dtype=float)[..., 0]
        return np.where(k > 0, special.xlogy(k, k) - k, 0.0)

    def _hess(self, eta):
        return np.exp(eta)[..., None]

    def suff_stat(self, x):
        return np.asarray(x, dtype=float)[..., None]

    def sample(self, eta, rng, size=None):
        eta = np.asarray(eta, dtype=float).reshape(-1)
        return np.asarray(rng.poisson(math.exp(eta[0]), size=size), dtype=float)

    def log_prior_normalizer(self, upsilon, n0):
        u = np.asarray(upsilon, dtype=float)[..., 0]
        n0 = np.asarray(n0, dtype=float)
        if np.any(u <= 0) or np.any(n0 <= 0):
            raise ImproperPriorError("poisson prior needs upsilon > 0 and n0 > 0")
        return special.gammaln(u) - u * np.log(n0)

    def prior_is_proper(self, upsilon, n0):
        return (np.asarray(upsilon, dtype=float)[..., 0] > 0) & (np.asarray(n0, dtype=float) > 0)

    def default_reference_expectation(self):
        return np.ones(1)

    def natural_law(self, upsilon, n0):
        # exp(eta) ~ Gamma(upsilon, rate n0)
        u = float(np.asarray(upsilon, dtype=float).reshape(-1)[0])
        n0 = float(n0)
        base = stats.gamma(a=u, scale=1.0 / n0)
        const = u * math.log(n0) - special.gammaln(u)

        def log_density(y):
            return const + u * y - n0 * np.exp(y)

        return ScalarLaw(base, np.log, np.exp, _identity, log_density=log_density)

    def interior_expectation(self, kappa):
        return np.maximum(np.asarray(kappa, dtype=float), 1e-12)


class Bernoulli(ExpFamily):
    """Bernoulli(p): eta = logit p, T(x) = x."""

    d = 1
    name = "bernoulli"
    natural_bounds = ((-np.inf, np.inf),)

    def in_expectation_domain(self, kappa):
        kappa = np.asarray(kappa, dtype=float)
        return (kappa[..., 0] > BOUNDARY_TOL) & (kappa[..., 0] < 1.0 - BOUNDARY_TOL)

    def _A(self, eta):
        return np.logaddexp(0.0, eta[..., 0])

    def _kappa(self, eta):
        return special.expit(eta)

    def _eta(self, kappa):
        return special.logit(kappa)

    def _F(self, kappa):
        k = kappa[..., 0]
        return special.xlogy(k, k) + special.xlog1py(1.0 - k, -k)

    def dual_closure(self, kappa):
        k = np.clip(np.asarray(kappa, dtype=float)[..., 0], 0.0, 1.0)
        return special.xlogy(k, k) + special.xlog1py(1.0 - k, -k)

    def _hess(self, eta):
        p = special.expit(eta)
        return (p * (1.0 - p))[..., None]

    def suff_stat(self, x):
        return np.asarray(x, dtype=float)[..., None]

    def sample(self, eta, rng, size=None):
        eta = np.asarray(eta, dtype=float).reshape(-1)
        return np.asarray(rng.random(size=size) < special.expit(eta[0]), dtype=float)

    def log_prior_normalizer(self, upsilon, n0):
        u = np.asarray(upsilon, dtype=float)[..., 0]
        n0 = np.asarray(n0, dtype=float)
        if np.any(u <= 0) or np.any(n0 - u <= 0):
            raise ImproperPriorError("bernoulli prior needs 0 < upsilon < n0")
        return special.betaln(u, n0 - u)

    def prior_is_proper(self, upsilon, n0):
        u = np.asarray(upsilon, dtype=float)[..., 0]
        return (u > 0) & (np.asarray(n0, dtype=float) - u > 0)

    def default_reference_expectation(self):
        return np.array([0.5])

    def natural_law(self, upsilon, n0):
        # expit(eta) ~ Beta(upsilon, n0 - upsilon)
        u = float(np.asarray(upsilon, dtype=float).reshape(-1)[0])
        v = float(n0) - u
        base = stats.beta(u, v)
        const = -special.betaln(u, v)

        def log_jac(y):
            y = np.asarray(y, dtype=float)
            return -np.logaddexp(0.0, y) - np.logaddexp(0.0, -y)

        def log_density(y):
            return const + u * special.log_expit(y) + v * special.log_expit(-y)

        return ScalarLaw(base, special.logit, special.expit, log_jac, log_density=log_density)

    def interior_expectation(self, kappa):
        return np.clip(np.asarray(kappa, dtype=float), 1e-12, 1.0 - 1e-12)


FAMILIES = {
    GaussianKnownVariance.name: GaussianKnownVariance,
    GaussianKnownMean.name: GaussianKnownMean,
    GaussianBothUnknown.name: GaussianBothUnknown,
    Poisson.name: Poisson,
    Bernoulli.name: Bernoulli,
}


def make_family(name: str, **params) -> ExpFamily:
    """Build a family from its registry name, e.g. ``make_family("gaussian_known_variance", sigma2=1)``."""
    try:
        cls = FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}") from None
    return cls(**params)
