"""Generalized Gaussian (exponential power) family with a fixed even shape.

    f(x; mu, sigma) = beta / (2 sigma Gamma(1/beta)) exp(-((x - mu)/sigma)^beta)

The shape ``beta`` is a family constant; the manifold is the (mu, sigma)
half-plane. Closed forms are written in terms of gamma-function ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from functools import lru_cache

import numpy as np

from ..core import ParameterPoint, StatisticalFamily
from ..errors import ConsistencyError, DomainError
from ..numerics import RandomStream, bracket_roots, gamma_ratio, log_gamma
from ..tensors import MetricTensor, Tensor3

__all__ = [
    "GeneralizedGaussianFamily",
    "ConnectionConstants",
    "check_beta",
    "gg_moment",
    "gg_metric_closed",
    "gg_connection_constants",
    "gg_skewness_closed",
    "gg_one_connection_closed",
    "gg_first_factor",
    "gg_curvature_1212_closed",
    "gg_gaussian_curvature_closed",
    "gg_flat_alphas",
    "gg_sample",
    "gg_one_connection_222_moment",
    "gg_gaussian_curvature_moment",
    "gg_flat_alphas_moment",
]


def check_beta(beta) -> int:
    """Validate that ``beta`` is an even integer >= 2 and return it as int."""
    try:
        b = int(beta)
    except (TypeError, ValueError):
        raise DomainError(f"beta must be an even integer, got {beta!r}") from None
    if b != beta or b < 2 or b % 2:
        raise DomainError(f"beta must be even and >= 2, got {beta!r}")
    return b


def _check_sigma(sigma):
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")


def gg_moment(k: int, beta: int, sigma: float = 1.0) -> float:
    """Central moment E[(X - mu)^k]."""
    beta = check_beta(beta)
    _check_sigma(sigma)
    if k < 0 or int(k) != k:
        raise DomainError(f"moment order must be a non-negative integer, got {k!r}")
    if k % 2:
        return 0.0
    return gamma_ratio((k + 1) / beta, 1 / beta) * sigma**k


@dataclass(frozen=True)
class ConnectionConstants:
    """Shape-only constants; every tensor coefficient is one of these over a power of sigma.

    ``c11``, ``c22`` scale the metric (sigma^-2); ``c112``, ``c121``, ``c222``
    the skewness tensor T (sigma^-3); ``c1_*`` the 1-connection (sigma^-3).
    """

    beta: int
    c11: float
    c22: float
    c112: float
    c121: float
    c222: float
    c1_112: float
    c1_121: float
    c1_222: float

    @classmethod
    def names(cls):
        return tuple(f.name for f in fields(cls) if f.name != "beta")


@lru_cache(maxsize=None)
def gg_connection_constants(beta: int) -> ConnectionConstants:
    """Evaluate the coefficient ledger for a given shape.

    ``c1_222`` follows the tabulated value -beta(beta-1); the value
    obtained from the moment formula is -beta(beta+1), see
    :func:`gg_one_connection_222_moment`.
    """
    b = check_beta(beta)
    lg1 = log_gamma(1 / b)
    r = lambda a: math.exp(log_gamma(a) - lg1)  # Gamma(a) / Gamma(1/b)

    g_lo = math.exp(log_gamma((b - 1) / b))
    g_2 = math.exp(log_gamma((2 * b - 1) / b))
    g_3 = math.exp(log_gamma((3 * b - 1) / b))
    # Recurrence identities the simplified closed forms rely on.
    for lhs, rhs in ((g_3, (2 * b - 1) * (b - 1) / b**2 * g_lo), (g_2, (b - 1) / b * g_lo)):
        if abs(lhs - rhs) > 1e-12 * max(1.0, abs(rhs)):
            raise ConsistencyError(f"gamma recurrence fails for beta={b}: {lhs!r} != {rhs!r}")

    c112 = r((3 * b - 1) / b) * b**3 - r((2 * b - 1) / b) * b**2
    return ConnectionConstants(
        beta=b,
        c11=r(1 - 1 / b) * b * (b - 1),
        c22=float(b),
        c112=c112,
        c121=c112,
        c222=2.0 * b**2,
        c1_112=r((b - 1) / b) * b * (b - 1) - r((2 * b - 1) / b) * b**2 * (b - 1),
        c1_121=-r((2 * b - 1) / b) * b**3,
        c1_222=-float(b * (b - 1)),
    )


def _constants(beta, constants):
    if constants is None:
        return gg_connection_constants(beta)
    if constants.beta != check_beta(beta):
        raise DomainError("constants were computed for a different beta")
    return constants


def gg_metric_closed(sigma: float, beta: int, constants: ConnectionConstants | None = None) -> MetricTensor:
    _check_sigma(sigma)
    c = _constants(beta, constants)
    return MetricTensor(np.diag([c.c11, c.c22]) / sigma**2)


def gg_skewness_closed(sigma: float, beta: int, constants: ConnectionConstants | None = None) -> Tensor3:
    """T_ijk from the ledger; T_111 and the entries with two sigma indices vanish."""
    _check_sigma(sigma)
    c = _constants(beta, constants)
    t = np.zeros((2, 2, 2))
    t[0, 0, 1] = c.c112
    t[0, 1, 0] = t[1, 0, 0] = c.c121
    t[1, 1, 1] = c.c222
    return Tensor3(t / sigma**3, "full")


def gg_one_connection_closed(sigma: float, beta: int, constants: ConnectionConstants | None = None) -> Tensor3:
    _check_sigma(sigma)
    c = _constants(beta, constants)
    t = np.zeros((2, 2, 2))
    t[0, 0, 1] = c.c1_112
    t[0, 1, 0] = t[1, 0, 0] = c.c1_121
    t[1, 1, 1] = c.c1_222
    return Tensor3(t / sigma**3, "first-two")


def gg_first_factor(beta: int, alpha: float) -> float:
    """c1_112 + (1-alpha)/2 c112, cross-checked against its simplified form."""
    b = check_beta(beta)
    c = gg_connection_constants(b)
    direct = c.c1_112 + 0.5 * (1 - alpha) * c.c112
    simplified = gamma_ratio((b - 1) / b, 1 / b) * b * (b - 1) * (2 - b + (1 - alpha) * (b - 1))
    if abs(direct - simplified) > 1e-10 * max(1.0, abs(simplified)):
        raise ConsistencyError(f"first factor mismatch at beta={b}, alpha={alpha}: {direct!r} vs {simplified!r}")
    return simplified


def gg_curvature_1212_closed(sigma: float, beta: int, alpha: float) -> float:
    _check_sigma(sigma)
    b = check_beta(beta)
    bracket = 2 - b + (1 - alpha) * (b - 1)
    return -(1 - alpha) * b * (b - 1) * bracket * gamma_ratio((b - 1) / b, 1 / b) / sigma**4


def gg_gaussian_curvature_closed(beta: int, alpha: float) -> float:
    b = check_beta(beta)
    return -(1 - alpha) * (2 - b + (1 - alpha) * (b - 1)) / b


def _roots_match(found, expected, tol):
    exp_unique = sorted(set(round(e, 12) for e in expected))
    return len(found) == len(exp_unique) and all(abs(f - e) <= tol for f, e in zip(found, exp_unique))


def gg_flat_alphas(beta: int) -> tuple:
    """The alphas at which the closed-form curvature vanishes: (1, 1/(beta-1))."""
    b = check_beta(beta)
    expected = (1.0, 1.0 / (b - 1))
    found = bracket_roots(lambda a: gg_gaussian_curvature_closed(b, a), -2.0, 2.0)
    if not _roots_match(found, expected, 1e-9):
        raise ConsistencyError(f"bisection roots {found} do not match {expected} for beta={b}")
    return expected


# Values obtained directly from the moment formula. They differ from the
# ledger above in the 222 coefficient of the 1-connection, and therefore in
# the alpha-dependence of the curvature.


def gg_one_connection_222_moment(beta: int) -> float:
    """c1_222 evaluated from E[d2l/dsigma2 dl/dsigma] by the moment formula."""
    b = check_beta(beta)
    m_b = gamma_ratio((b + 1) / b, 1 / b)  # E[z^b] = 1/b
    m_2b = gamma_ratio((2 * b + 1) / b, 1 / b)
    return -1 + b * m_b + b * (b + 1) * m_b - b**2 * (b + 1) * m_2b


def gg_gaussian_curvature_moment(beta: int, alpha: float) -> float:
    """K^(alpha) assembled with the moment-formula coefficients: -(1+a)(1-(b-1)a)/b."""
    b = check_beta(beta)
    return -(1 + alpha) * (1 - (b - 1) * alpha) / b


def gg_flat_alphas_moment(beta: int) -> tuple:
    b = check_beta(beta)
    return (-1.0, 1.0 / (b - 1))


def gg_sample(mu: float, sigma: float, beta: int, n: int, stream: RandomStream) -> np.ndarray:
    """Draw X = mu + S sigma G^(1/beta), G ~ Gamma(1/beta, 1), S = +-1."""
    b = check_beta(beta)
    _check_sigma(sigma)
    rng = stream.generator()
    g = rng.standard_gamma(1.0 / b, size=n)
    s = 2.0 * rng.integers(0, 2, size=n) - 1.0
    return mu + s * sigma * g ** (1.0 / b)


class GeneralizedGaussianFamily(StatisticalFamily):
    """M1 at a fixed even shape; coordinates (mu, sigma)."""

    param_dim = 2
    sample_dim = 1
    support = "line"
    charts = ("location-scale",)

    def __init__(self, beta: int):
        self.beta = check_beta(beta)
        self.name = "gg"
        self._log_norm = math.log(self.beta) - math.log(2.0) - log_gamma(1.0 / self.beta)

    def param_bounds(self, chart):
        return [(-math.inf, math.inf), (0.0, math.inf)]

    def quadrature_frame(self, point):
        mu, sigma = point.coords
        return np.array([mu]), np.array([sigma])

    def _log_density(self, x, coords, chart):
        mu, sigma = coords
        z = (x - mu) / sigma
        return self._log_norm - math.log(sigma) - z**self.beta

    def _analytic_score(self, x, coords, chart):
        mu, sigma = coords
        b = self.beta
        z = (x - mu) / sigma
        zb1 = z ** (b - 1)
        return np.stack([b * zb1 / sigma, (b * zb1 * z - 1.0) / sigma], axis=-1)

    def _analytic_hessian(self, x, coords, chart):
        mu, sigma = coords
        b = self.beta
        z = (x - mu) / sigma
        zb2 = z ** (b - 2)
        h = np.empty(z.shape + (2, 2))
        h[..., 0, 0] = -b * (b - 1) * zb2 / sigma**2
        h[..., 0, 1] = h[..., 1, 0] = -(b**2) * zb2 * z / sigma**2
        h[..., 1, 1] = (1.0 - b * (b + 1) * zb2 * z * z) / sigma**2
        return h

    def sample(self, point, n, stream):
        self.validate(point)
        mu, sigma = point.coords
        return gg_sample(mu, sigma, self.beta, n, stream)

    def closed_metric(self, point: ParameterPoint):
        self.validate(point)
        return gg_metric_closed(point.coords[1], self.beta)

    def closed_skewness(self, point):
        self.validate(point)
        return gg_skewness_closed(point.coords[1], self.beta)

    def closed_one_connection(self, point):
        self.validate(point)
        return gg_one_connection_closed(point.coords[1], self.beta)

    def __repr__(self):
        return f"GeneralizedGaussianFamily(beta={self.beta})"
