"""Orthant half-Gaussian product family on the region where prod(x) > 0.

    f(x; lam) = 2 prod_i sqrt(lam_i / 2pi) exp(-lam_i x_i^2 / 2)

Every coordinate marginal is N(0, 1/lam_i) once p >= 2, while the joint law
is not Gaussian. The family is exponential with sufficient statistics x_i^2,
natural coordinates theta_i = -lam_i / 2 and potential
psi(theta) = -1/2 sum log(-theta_i).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..core import ExpectationEngine, StatisticalFamily, expect_with_error
from ..errors import DomainError, SupportError
from ..numerics import RandomStream
from ..tensors import MetricTensor, Tensor3

__all__ = [
    "OrthantGaussianFamily",
    "natural_to_precision",
    "precision_to_natural",
    "m2_potential",
    "m2_metric_closed",
    "m2_skewness_closed",
    "m2_alpha_connection_closed",
    "m2_log_density",
    "m2_sample",
    "m2_marginal_check",
    "MarginalReport",
    "admissible_signs",
]

_LOG2 = math.log(2.0)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _theta(theta) -> np.ndarray:
    t = np.atleast_1d(np.asarray(theta, dtype=float))
    if t.ndim != 1 or not np.all(t < 0):
        raise DomainError(f"natural coordinates must all be negative, got {t.tolist()}")
    return t


def _lam(lam) -> np.ndarray:
    l = np.atleast_1d(np.asarray(lam, dtype=float))
    if l.ndim != 1 or not np.all(l > 0):
        raise DomainError(f"precisions must all be positive, got {l.tolist()}")
    return l


def natural_to_precision(theta) -> np.ndarray:
    return -2.0 * _theta(theta)


def precision_to_natural(lam) -> np.ndarray:
    return -0.5 * _lam(lam)


def m2_potential(theta) -> float:
    t = _theta(theta)
    return float(-0.5 * np.sum(np.log(-t)))


def m2_metric_closed(theta) -> MetricTensor:
    """Hessian of the potential: diag(1 / (2 theta_i^2))."""
    t = _theta(theta)
    return MetricTensor(np.diag(0.5 / t**2))


def _diag3(values) -> np.ndarray:
    p = values.size
    out = np.zeros((p, p, p))
    out[np.arange(p), np.arange(p), np.arange(p)] = values
    return out


def m2_skewness_closed(theta) -> Tensor3:
    """Third derivative of the potential, -1/theta_i^3 on the diagonal."""
    t = _theta(theta)
    return Tensor3(_diag3(-1.0 / t**3), "full")


def m2_alpha_connection_closed(theta, alpha: float) -> Tensor3:
    """Gamma^(alpha)_ijk = (1-alpha)/2 d3psi; only i = j = k survives."""
    t = _theta(theta)
    return Tensor3(_diag3(-(1.0 - alpha) / (2.0 * t**3)), "first-two")


def admissible_signs(p: int) -> np.ndarray:
    """All sign vectors in {-1, +1}^p with positive product."""
    rows = [s for s in itertools.product((1.0, -1.0), repeat=p) if np.prod(s) > 0]
    return np.array(rows)


def _in_omega(x) -> np.ndarray:
    return np.prod(x, axis=-1) > 0


def _log_density_precision(x, lam):
    return _LOG2 + np.sum(0.5 * np.log(lam) - _HALF_LOG_2PI - 0.5 * lam * x * x, axis=-1)


def m2_log_density(lam, x):
    lam = _lam(lam)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != lam.size:
        raise SupportError(f"sample dimension {x.shape[-1]} does not match p = {lam.size}")
    if not np.all(_in_omega(x)):
        raise SupportError("sample outside the region prod(x) > 0")
    out = _log_density_precision(x, lam)
    return float(out) if np.ndim(out) == 0 else out


def m2_sample(lam, n: int, stream: RandomStream) -> np.ndarray:
    """|x_i| half-normal with scale lam_i^-1/2, signs uniform over admissible patterns."""
    lam = _lam(lam)
    p = lam.size
    rng = stream.generator()
    mag = np.abs(rng.standard_normal((n, p))) / np.sqrt(lam)
    signs = 2.0 * rng.integers(0, 2, size=(n, p)) - 1.0
    # Last sign fixes the product to +1; the pattern is uniform over 2^(p-1) choices.
    signs[:, -1] = np.prod(signs[:, :-1], axis=1) if p > 1 else 1.0
    return mag * signs


class OrthantGaussianFamily(StatisticalFamily):
    """M2 in either the ``natural`` (theta) or ``precision`` (lam) chart."""

    charts = ("natural", "precision")
    even_scores = True

    def __init__(self, p: int):
        if int(p) != p or p < 1:
            raise DomainError(f"p must be a positive integer, got {p!r}")
        self.p = int(p)
        self.name = "m2"
        self.param_dim = self.p
        self.sample_dim = self.p
        self.support = "half-line" if self.p == 1 else "orthant-pair"

    def param_bounds(self, chart):
        if chart == "natural":
            return [(-math.inf, 0.0)] * self.p
        return [(0.0, math.inf)] * self.p

    def precision(self, point) -> np.ndarray:
        c = point.array
        return -2.0 * c if point.chart == "natural" else c

    def convert(self, point, chart):
        self.validate(point)
        if chart == point.chart:
            return point
        if chart == "natural":
            return self.point(precision_to_natural(point.array), chart="natural")
        if chart == "precision":
            return self.point(natural_to_precision(point.array), chart="precision")
        return super().convert(point, chart)

    def in_support(self, x):
        x = np.asarray(x, dtype=float)
        if self.p == 1:
            return np.isfinite(x) & (x > 0)
        return np.all(np.isfinite(x), axis=-1) & _in_omega(x)

    def _as_matrix(self, x):
        x = np.asarray(x, dtype=float)
        return x.reshape(-1, 1) if self.p == 1 and x.ndim == 1 else x

    def quadrature_frame(self, point):
        lam = self.precision(point)
        return np.zeros(self.p), 1.0 / np.sqrt(lam)

    def _log_density(self, x, coords, chart):
        lam = -2.0 * coords if chart == "natural" else coords
        return _log_density_precision(self._as_matrix(x), lam)

    def _analytic_score(self, x, coords, chart):
        x2 = self._as_matrix(x) ** 2
        if chart == "natural":
            return x2 + 0.5 / coords
        return 0.5 / coords - 0.5 * x2

    def _analytic_hessian(self, x, coords, chart):
        n = self._as_matrix(x).shape[0]
        diag = -0.5 / coords**2
        return np.broadcast_to(np.diag(diag), (n, self.p, self.p)).copy()

    def sample(self, point, n, stream):
        self.validate(point)
        x = m2_sample(self.precision(point), n, stream)
        return x[:, 0] if self.p == 1 else x

    def closed_metric(self, point):
        self.validate(point)
        if point.chart == "natural":
            return m2_metric_closed(point.array)
        return MetricTensor(np.diag(0.5 / point.array**2))

    def closed_skewness(self, point):
        self.validate(point)
        if point.chart == "natural":
            return m2_skewness_closed(point.array)
        return Tensor3(_diag3(-1.0 / point.array**3), "full")

    def closed_one_connection(self, point):
        # Both charts are affine in theta, so the 1-connection vanishes in each.
        self.validate(point)
        return Tensor3(np.zeros((self.p,) * 3), "first-two")

    def __repr__(self):
        return f"OrthantGaussianFamily(p={self.p})"


@dataclass(frozen=True)
class MarginalReport:
    index: int
    moments: tuple
    expected: tuple
    tolerances: tuple
    compared: tuple  # which of the four moments enter the verdict
    passed: bool


def m2_marginal_check(lam, i: int, engine: ExpectationEngine) -> MarginalReport:
    """Compare the first four moments of coordinate ``i`` (0-based) with N(0, 1/lam_i).

    For p = 1 the support is the positive half-line, so only the even
    moments are expected to be Gaussian; odd moments are reported but not
    compared.
    """
    lam = _lam(lam)
    p = lam.size
    if not 0 <= i < p:
        raise DomainError(f"coordinate index {i} out of range for p = {p}")
    fam = OrthantGaussianFamily(p)
    pt = fam.point(lam, chart="precision")
    v = 1.0 / lam[i]
    expected = (0.0, v, 0.0, 3.0 * v * v)
    moments, tols = [], []
    for k in range(1, 5):
        col = (lambda x, k=k: x**k) if p == 1 else (lambda x, k=k: x[:, i] ** k)
        m, se = expect_with_error(engine, fam, pt, col, even=(k % 2 == 0))
        moments.append(m)
        if engine.kind == "monte-carlo":
            tols.append(4.0 * se)
        else:
            tols.append(1e-9 * max(1.0, abs(expected[k - 1])))
    compared = (p > 1, True, p > 1, True)
    passed = all(abs(m - e) <= t for m, e, t, c in zip(moments, expected, tols, compared) if c)
    return MarginalReport(i, tuple(moments), expected, tuple(tols), compared, passed)
