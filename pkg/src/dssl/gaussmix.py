"""Two-class, equal-variance 1-D Gaussian mixture and the induced density of
``theta = p(y=1 | x)``.

The map ``x -> theta`` is a logistic function of ``x``, so ``theta`` has a
closed-form density on (0, 1). Writing ``L = log(theta / (1 - theta))`` the
density is::

    p(theta) = prefactor / (theta (1 - theta)) * sum_k pi_k exp(a L^2 + b_k L + c_k)

with ``prefactor = sigma / (|mu1 - mu0| sqrt(2 pi))``. :func:`density_coeffs`
returns ``a``, ``b_k`` and ``c_k``; :func:`p_theta_oracle` evaluates the same
density by the change of variables ``p(x(theta)) |dx/dtheta|`` and is kept
independent of the coefficients.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import expit, logit, ndtri

from .exceptions import DomainError

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianMixture1D:
    """Classes ``y in {0, 1}`` with ``x | y=k ~ N(mu_k, sigma^2)`` and ``p(y=1) = pi1``.

    ``pi1`` may be 0 or 1 (a degenerate single-Gaussian mixture) for
    :func:`p_x_density` and :func:`sample`; the ``theta`` maps need
    ``0 < pi1 < 1``.
    """

    mu0: float = -1.0
    mu1: float = 1.0
    sigma: float = 1.0
    pi1: float = 0.5

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma!r}")
        if self.mu0 == self.mu1:
            raise DomainError("class means must differ")
        if not 0.0 <= self.pi1 <= 1.0:
            raise DomainError(f"pi1 must lie in [0, 1], got {self.pi1!r}")

    @property
    def pi0(self):
        return 1.0 - self.pi1

    @property
    def separation(self):
        """``|mu1 - mu0| / sigma``."""
        return abs(self.mu1 - self.mu0) / self.sigma

    @property
    def log_prior_ratio(self):
        if not 0.0 < self.pi1 < 1.0:
            raise DomainError("theta is undefined for a degenerate mixture (pi1 in {0, 1})")
        return math.log(self.pi1 / self.pi0)

    def slope(self):
        """Coefficient of ``x`` in the logit of ``theta``."""
        return (self.mu1 - self.mu0) / self.sigma**2


@dataclass(frozen=True)
class ThetaDensityCoeffs:
    a: float
    b0: float
    b1: float
    c0: float
    c1: float
    prefactor: float


def _logit_of_x(x, mix):
    s2 = mix.sigma**2
    return mix.log_prior_ratio + mix.slope() * x - 0.5 * (mix.mu1**2 - mix.mu0**2) / s2


def theta_of_x(x, mix):
    """``p(y=1 | x)`` under the mixture."""
    return expit(_logit_of_x(np.asarray(x, dtype=float), mix))


def _check_open_unit(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta > 0.0)) or np.any(~(theta < 1.0)):
        raise DomainError("theta must lie strictly inside (0, 1)")
    return theta


def x_of_theta(theta, mix):
    """Inverse of :func:`theta_of_x`."""
    theta = _check_open_unit(theta)
    mid = 0.5 * (mix.mu0 + mix.mu1)
    return (logit(theta) - mix.log_prior_ratio) / mix.slope() + mid


def p_x_density(x, mix):
    """Mixture density ``sum_k pi_k N(x; mu_k, sigma^2)``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for mu, weight in ((mix.mu0, mix.pi0), (mix.mu1, mix.pi1)):
        if weight > 0:
            z = (x - mu) / mix.sigma
            out = out + weight * np.exp(-0.5 * z * z - _LOG_SQRT_2PI) / mix.sigma
    return out


def density_coeffs(mix):
    """Coefficients of the closed-form ``theta`` density (see module docstring)."""
    d = mix.mu1 - mix.mu0
    s2 = mix.sigma**2
    rho = mix.log_prior_ratio
    mid = 0.5 * (mix.mu0 + mix.mu1)
    a = -s2 / (2.0 * d * d)
    b = [rho * s2 / (d * d) + (mu - mid) / d for mu in (mix.mu0, mix.mu1)]
    c = [-(d * d) * bk * bk / (2.0 * s2) for bk in b]
    prefactor = mix.sigma / (abs(d) * math.sqrt(2.0 * math.pi))
    return ThetaDensityCoeffs(a=a, b0=b[0], b1=b[1], c0=c[0], c1=c[1], prefactor=prefactor)


def p_theta_components(theta, mix):
    """Joint densities ``(p(theta, y=0), p(theta, y=1))`` in closed form."""
    theta = _check_open_unit(theta)
    co = density_coeffs(mix)
    lg = logit(theta)
    jac = co.prefactor / (theta * (1.0 - theta))
    comps = []
    for weight, b, c in ((mix.pi0, co.b0, co.c0), (mix.pi1, co.b1, co.c1)):
        comps.append(weight * jac * np.exp(co.a * lg * lg + b * lg + c))
    return comps[0], comps[1]


def p_theta_density(theta, mix):
    """Closed-form density of ``theta = p(y=1 | x)`` for ``x`` drawn from the mixture."""
    p0, p1 = p_theta_components(theta, mix)
    return p0 + p1


def dtheta_dx(x, mix):
    t = theta_of_x(x, mix)
    return t * (1.0 - t) * mix.slope()


def p_theta_oracle(theta, mix):
    """Change-of-variables evaluation ``p(x(theta)) / |dtheta/dx|``."""
    x = x_of_theta(theta, mix)
    return p_x_density(x, mix) / np.abs(dtheta_dx(x, mix))


def _logit_integrand(lg, mix, co):
    # p(theta) * dtheta/dlogit, i.e. the density of logit(theta); smooth everywhere
    total = 0.0
    for weight, b, c in ((mix.pi0, co.b0, co.c0), (mix.pi1, co.b1, co.c1)):
        if weight > 0:
            total += weight * math.exp(co.a * lg * lg + b * lg + c)
    return co.prefactor * total


def integrate_theta_density(mix, lo=0.0, hi=1.0, epsabs=1e-10):
    """Integrate :func:`p_theta_density` over ``[lo, hi]`` by adaptive quadrature.

    The integral is taken in logit coordinates, where the integrand is a
    weighted sum of Gaussian bumps instead of a function with end spikes.
    """
    if not 0.0 <= lo <= hi <= 1.0:
        raise DomainError("integration bounds must satisfy 0 <= lo <= hi <= 1")
    co = density_coeffs(mix)
    a = -math.inf if lo == 0.0 else float(logit(lo))
    b = math.inf if hi == 1.0 else float(logit(hi))
    if a == b:
        return 0.0
    val, _ = integrate.quad(_logit_integrand, a, b, args=(mix, co), epsabs=epsabs, epsrel=1e-10, limit=200)
    return val


def sample(mix, n, seed):
    """Draw ``n`` labelled points; returns ``(x, y)`` arrays.

    Uses a Philox counter-based generator and inverse-CDF transforms, so the
    stream is reproducible across platforms for a given seed.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    rng = np.random.Generator(np.random.Philox(seed))
    u = rng.random((n, 2))
    y = (u[:, 0] < mix.pi1).astype(np.int64)
    means = np.where(y == 1, mix.mu1, mix.mu0)
    # keep ndtri away from +-inf on u == 0
    z = ndtri(np.clip(u[:, 1], 1e-300, None))
    return means + mix.sigma * z, y
