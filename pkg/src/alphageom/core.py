"""Parametric families, parameter points and expectation engines."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, SupportError, UnsupportedEngineError
from .numerics import (
    QuadratureRule,
    RandomStream,
    StepPolicy,
    central_difference,
    tanh_sinh_rule,
)

__all__ = [
    "ParameterPoint",
    "StatisticalFamily",
    "ExpectationEngine",
    "log_density",
    "score",
    "log_density_hessian",
    "expect",
    "expect_with_error",
    "expectation_nodes",
]

SUPPORT_KINDS = ("line", "half-line", "orthant-pair")
ENGINE_KINDS = ("closed-form", "quadrature", "monte-carlo")


@dataclass(frozen=True)
class ParameterPoint:
    """Coordinates of a point in a named chart."""

    coords: tuple
    chart: str

    def __post_init__(self):
        coords = tuple(float(c) for c in np.atleast_1d(np.asarray(self.coords, dtype=float)))
        object.__setattr__(self, "coords", coords)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords)

    def with_coords(self, coords) -> "ParameterPoint":
        return ParameterPoint(tuple(coords), self.chart)

    def __len__(self):
        return len(self.coords)


class StatisticalFamily:
    """A parametric family of densities p(x; theta).

    Subclasses implement ``_log_density(x, coords, chart)`` vectorized over a
    batch of samples (shape ``(n,)`` when ``sample_dim == 1``, otherwise
    ``(n, sample_dim)``). They may also provide ``_analytic_score`` and
    ``_analytic_hessian`` returning ``(n, p)`` and ``(n, p, p)`` arrays; when
    those are ``None`` derivatives are taken by central differences.
    """

    name: str = "family"
    param_dim: int = 1
    sample_dim: int = 1
    support: str = "line"
    charts: tuple = ("default",)
    # True when score and hessian are even functions of every sample coordinate.
    even_scores: bool = False

    _analytic_score: Optional[Callable] = None
    _analytic_hessian: Optional[Callable] = None

    # -- parameters ---------------------------------------------------------

    def param_bounds(self, chart: str) -> list:
        return [(-math.inf, math.inf)] * self.param_dim

    def point(self, *coords, chart: Optional[str] = None) -> ParameterPoint:
        if len(coords) == 1 and np.ndim(coords[0]) == 1:
            coords = tuple(coords[0])
        pt = ParameterPoint(coords, chart or self.charts[0])
        self.validate(pt)
        return pt

    def validate(self, point: ParameterPoint) -> None:
        if point.chart not in self.charts:
            raise DomainError(f"{self.name}: unknown chart {point.chart!r}; expected one of {self.charts}")
        if len(point.coords) != self.param_dim:
            raise DomainError(f"{self.name}: expected {self.param_dim} coordinates, got {len(point.coords)}")
        for axis, (c, (lo, hi)) in enumerate(zip(point.coords, self.param_bounds(point.chart))):
            if not lo < c < hi:
                raise DomainError(f"{self.name}: coordinate {axis} = {c!r} outside ({lo}, {hi})")

    def convert(self, point: ParameterPoint, chart: str) -> ParameterPoint:
        if chart == point.chart:
            return point
        raise DomainError(f"{self.name}: no conversion from {point.chart!r} to {chart!r}")

    # -- samples ------------------------------------------------------------

    def in_support(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.sample_dim == 1:
            ok = np.isfinite(x)
            return ok & (x > 0) if self.support == "half-line" else ok
        ok = np.all(np.isfinite(x), axis=-1)
        if self.support == "orthant-pair":
            ok &= np.prod(x, axis=-1) > 0
        return ok

    def quadrature_frame(self, point: ParameterPoint):
        """Per-axis (location, scale) used to place quadrature nodes."""
        d = self.sample_dim
        return np.zeros(d), np.ones(d)

    def sample(self, point: ParameterPoint, n: int, stream: RandomStream) -> np.ndarray:
        raise UnsupportedEngineError(f"{self.name}: no sampler available")

    def _log_density(self, x, coords, chart):
        raise NotImplementedError

    # Closed forms; families override what they know.
    def closed_metric(self, point):
        raise UnsupportedEngineError(f"{self.name}: no closed-form metric")

    def closed_skewness(self, point):
        raise UnsupportedEngineError(f"{self.name}: no closed-form skewness tensor")

    def closed_one_connection(self, point):
        raise UnsupportedEngineError(f"{self.name}: no closed-form 1-connection")

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"


# ---------------------------------------------------------------------------
# Log-density and its parameter derivatives
# ---------------------------------------------------------------------------


def _batch(family, x):
    """Reshape ``x`` into a batch; returns (batch, was_single_sample)."""
    x = np.asarray(x, dtype=float)
    if family.sample_dim == 1:
        return np.atleast_1d(x), x.ndim == 0
    if x.ndim == 1:
        if x.size != family.sample_dim:
            raise SupportError(f"{family.name}: expected samples of dimension {family.sample_dim}")
        return x[None, :], True
    return x, False


def _checked(family, point, x):
    family.validate(point)
    xb, single = _batch(family, x)
    ok = family.in_support(xb)
    if not np.all(ok):
        bad = xb[int(np.argmin(ok))]
        raise SupportError(f"{family.name}: sample {np.asarray(bad).tolist()} outside the {family.support} support")
    return xb, single


def log_density(family: StatisticalFamily, point: ParameterPoint, x):
    """l(x; theta) for one sample or a batch."""
    xb, single = _checked(family, point, x)
    out = family._log_density(xb, point.array, point.chart)
    return float(out[0]) if single else out


def _numeric_score(family, point, xb):
    bounds = family.param_bounds(point.chart)
    cols = [
        central_difference(
            lambda c: family._log_density(xb, c, point.chart), point.array, a, 1, StepPolicy.default(1), bounds
        )
        for a in range(family.param_dim)
    ]
    return np.stack(cols, axis=-1)


def _numeric_hessian(family, point, xb):
    bounds = family.param_bounds(point.chart)
    p = family.param_dim
    chart = point.chart
    n = xb.shape[0]
    h = np.empty((n, p, p))
    for a in range(p):
        h[:, a, a] = central_difference(
            lambda c: family._log_density(xb, c, chart), point.array, a, 2, StepPolicy.default(2), bounds
        )
        for b in range(a + 1, p):
            inner = lambda c, b=b: central_difference(
                lambda cc: family._log_density(xb, cc, chart), c, b, 1, StepPolicy.default(2), bounds
            )
            h[:, a, b] = h[:, b, a] = central_difference(inner, point.array, a, 1, StepPolicy.default(2), bounds)
    return h


def _score_batch(family, point, xb):
    if family._analytic_score is not None:
        return family._analytic_score(xb, point.array, point.chart)
    return _numeric_score(family, point, xb)


def _hessian_batch(family, point, xb):
    if family._analytic_hessian is not None:
        h = family._analytic_hessian(xb, point.array, point.chart)
    else:
        h = _numeric_hessian(family, point, xb)
    return 0.5 * (h + np.swapaxes(h, -1, -2))


def score(family: StatisticalFamily, point: ParameterPoint, x):
    """Gradient of l with respect to the coordinates, per sample."""
    xb, single = _checked(family, point, x)
    s = _score_batch(family, point, xb)
    return s[0] if single else s


def log_density_hessian(family: StatisticalFamily, point: ParameterPoint, x):
    """Matrix of second partials of l with respect to the coordinates."""
    xb, single = _checked(family, point, x)
    h = _hessian_batch(family, point, xb)
    return h[0] if single else h


# ---------------------------------------------------------------------------
# Expectation engines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpectationEngine:
    """How E[.] is evaluated.

    ``quadrature`` uses a double-exponential rule of ``nodes`` points per
    axis for one-dimensional supports, and a tensor product of folded rules
    (capped at ``product_budget`` total nodes) for even integrands on the
    orthant-pair region. ``monte-carlo`` averages ``sample_count`` draws
    from ``stream``.
    """

    kind: str = "quadrature"
    nodes: int = 400
    sample_count: Optional[int] = None
    stream: Optional[RandomStream] = None
    product_budget: int = 2**18

    def __post_init__(self):
        if self.kind not in ENGINE_KINDS:
            raise ValueError(f"unknown engine kind {self.kind!r}")
        if self.kind == "monte-carlo":
            if not self.sample_count or self.sample_count < 1 or self.stream is None:
                raise ValueError("monte-carlo engine needs a positive sample_count and a stream")
        if self.kind == "quadrature" and self.nodes < 4:
            raise ValueError("quadrature engine needs at least 4 nodes")

    @classmethod
    def quadrature(cls, nodes: int = 400) -> "ExpectationEngine":
        return cls("quadrature", nodes=nodes)

    @classmethod
    def monte_carlo(cls, sample_count: int, seed: int, stream_id: int = 0) -> "ExpectationEngine":
        return cls("monte-carlo", sample_count=sample_count, stream=RandomStream(seed, stream_id))

    @classmethod
    def closed_form(cls) -> "ExpectationEngine":
        return cls("closed-form")

    @property
    def rule(self) -> Optional[QuadratureRule]:
        if self.kind != "quadrature":
            return None
        return tanh_sinh_rule(self.nodes, "line")


def _folded(n_positive: int) -> QuadratureRule:
    return tanh_sinh_rule(2 * n_positive, "line").folded()


def _orthant_nodes(engine, d, loc, scale, even):
    """Tensor-product nodes over the region prod(x) > 0.

    Even integrands need only the positive orthant (weight 2^(d-1)) and use
    folded rules; anything else is summed over all admissible sign patterns
    with exp-sinh half-line rules.
    """
    if even:
        per_axis = max(2, min(engine.nodes // 2, int(engine.product_budget ** (1.0 / d) + 1e-9)))
        rule = _folded(per_axis)
        patterns = np.ones((1, d))
        factor = 2.0 ** (d - 1)
    else:
        patterns = np.array([s for s in itertools.product((1.0, -1.0), repeat=d) if np.prod(s) > 0])
        budget = engine.product_budget / len(patterns)
        # exp-sinh needs about 64 nodes per axis for 1e-10; afford that up to d = 3.
        per_axis = min(engine.nodes, max(64 if d <= 3 else 8, int(budget ** (1.0 / d) + 1e-9)))
        rule = tanh_sinh_rule(per_axis, "half-line")
        factor = 1.0
    axes = [rule.scaled(loc[k], scale[k]) for k in range(d)]
    y = np.stack([g.ravel() for g in np.meshgrid(*[a[0] for a in axes], indexing="ij")], axis=-1)
    wy = factor * np.prod(
        np.stack([g.ravel() for g in np.meshgrid(*[a[1] for a in axes], indexing="ij")], axis=-1), axis=-1
    )
    x = np.concatenate([y * s for s in patterns])
    w = np.tile(wy, len(patterns))
    return x, w


def expectation_nodes(engine: ExpectationEngine, family: StatisticalFamily, point: ParameterPoint, even: bool = False):
    """Samples ``x`` and weights ``w`` with E[g] ~= sum(w * g(x)).

    For quadrature the density is folded into ``w``; for monte-carlo the
    weights are uniform ``1/n``. ``even`` asserts that every integrand to be
    averaged is even in each sample coordinate, which enables the product
    decomposition over the orthant-pair region.
    """
    family.validate(point)
    if engine.kind == "monte-carlo":
        x = family.sample(point, engine.sample_count, engine.stream)
        return x, np.full(engine.sample_count, 1.0 / engine.sample_count)
    if engine.kind != "quadrature":
        raise UnsupportedEngineError(f"{engine.kind} engine does not evaluate expectations numerically")

    loc, scale = family.quadrature_frame(point)
    if family.sample_dim > 1 and family.support != "orthant-pair":
        raise UnsupportedEngineError(
            f"{family.name}: no product decomposition for a {family.sample_dim}-dimensional {family.support} support"
        )
    if family.support == "line":
        x, w = engine.rule.scaled(loc[0], scale[0])
    elif family.support == "half-line":
        rule = _folded(engine.nodes // 2) if even else tanh_sinh_rule(engine.nodes, "half-line")
        x, w = rule.scaled(loc[0], scale[0])
    elif family.support == "orthant-pair":
        x, w = _orthant_nodes(engine, family.sample_dim, loc, scale, even)
    else:
        raise UnsupportedEngineError(f"unknown support {family.support!r}")
    w = w * np.exp(family._log_density(x, point.array, point.chart))
    return x, w


def _values(g, x, n):
    vals = np.asarray(g(x), dtype=float)
    if vals.ndim == 0:
        vals = np.full(n, float(vals))
    return vals


def _weighted_mean(engine, w, vals):
    if engine.kind == "monte-carlo":
        # Plain sample mean, so E[1] is exactly 1.
        return np.mean(vals, axis=0)
    return np.tensordot(w, vals, axes=(0, 0))


def expect(engine: ExpectationEngine, family: StatisticalFamily, point: ParameterPoint, g: Callable, even: bool = False):
    """E_theta[g(X)]; ``g`` receives a batch of samples."""
    x, w = expectation_nodes(engine, family, point, even)
    out = _weighted_mean(engine, w, _values(g, x, w.size))
    return float(out) if np.ndim(out) == 0 else out


def expect_with_error(engine, family, point, g, even: bool = False):
    """Like :func:`expect`, also returning a standard error (0 for quadrature)."""
    x, w = expectation_nodes(engine, family, point, even)
    vals = _values(g, x, w.size)
    mean = _weighted_mean(engine, w, vals)
    if engine.kind == "monte-carlo":
        se = np.std(vals, axis=0, ddof=1) / math.sqrt(w.size)
    else:
        se = np.zeros_like(mean)
    if np.ndim(mean) == 0:
        return float(mean), float(se)
    return mean, se
