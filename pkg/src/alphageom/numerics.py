"""Numerical primitives: log-gamma, double-exponential quadrature, finite
differences, SPD inversion, seeded random streams and bracketing root search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import DomainError, EvaluationError, NotPositiveDefiniteError

__all__ = [
    "log_gamma",
    "gamma_ratio",
    "QuadratureRule",
    "tanh_sinh_rule",
    "integrate_expectation",
    "StepPolicy",
    "central_difference",
    "spd_inverse",
    "RandomStream",
    "bracket_roots",
]

# Lanczos approximation, g = 7, nine terms (Godfrey's coefficient set).
LANCZOS_G = 7.0
LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for real ``x > 0``."""
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise DomainError(f"log_gamma requires a finite x > 0, got {x!r}")
    if x < 0.5:
        # Shift up by one; the series is least accurate close to zero.
        return log_gamma(x + 1.0) - math.log(x)
    z = x - 1.0
    series = LANCZOS_COEFFS[0]
    for k in range(1, len(LANCZOS_COEFFS)):
        series += LANCZOS_COEFFS[k] / (z + k)
    t = z + LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * math.log(t) - t + math.log(series)


def gamma_ratio(a: float, b: float) -> float:
    """Gamma(a) / Gamma(b), evaluated in log space."""
    if not (a > 0 and b > 0):
        raise DomainError(f"gamma_ratio requires a, b > 0, got ({a!r}, {b!r})")
    return math.exp(log_gamma(a) - log_gamma(b))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

SUPPORTS = ("line", "half-line")

# Trapezoid ranges in the transformed variable. The line map reaches |x| ~ 40,
# the half-line map covers roughly [1e-12, 40]; both assume the integrand is
# expressed in units of the density's natural scale.
_T_RANGE = {"line": (-1.75, 1.75), "half-line": (-3.6, 1.65)}


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and positive weights for integrals over the line or half-line.

    ``nodes`` are abscissae at unit scale, already pushed through the
    double-exponential change of variables named by ``domain_map``; the
    weights include the Jacobian of that map.
    """

    support: str
    nodes: np.ndarray
    weights: np.ndarray
    domain_map: str

    def __post_init__(self):
        if self.support not in SUPPORTS:
            raise ValueError(f"unknown support {self.support!r}")
        if self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights must have equal length")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def node_count(self) -> int:
        return self.nodes.size

    def folded(self) -> "QuadratureRule":
        """Half-line rule for integrands that are even about the origin.

        Built from a line rule by keeping its non-negative nodes, which
        avoids the clustering of exp-sinh nodes near zero.
        """
        if self.support != "line":
            raise ValueError("only a line rule can be folded")
        # int_0^inf g = 1/2 int_R g(|x|): positive nodes keep their weight,
        # a node at the origin contributes half of its weight.
        pos = self.nodes > 0
        nodes = self.nodes[pos]
        weights = self.weights[pos]
        zero = self.nodes == 0
        if np.any(zero):
            nodes = np.concatenate([[0.0], nodes])
            weights = np.concatenate([0.5 * self.weights[zero], weights])
        return QuadratureRule("half-line", _frozen(nodes), _frozen(weights), "folded-sinh-sinh")

    def scaled(self, loc: float = 0.0, scale: float = 1.0):
        """Abscissae and weights after the affine map ``x = loc + scale * node``."""
        return loc + scale * self.nodes, scale * self.weights


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def tanh_sinh_rule(node_count: int = 400, support: str = "line") -> QuadratureRule:
    """Double-exponential rule with ``node_count`` equally spaced trapezoid nodes.

    ``line`` uses x = sinh(pi/2 sinh t); ``half-line`` uses x = exp(pi/2 sinh t).
    """
    if node_count < 3:
        raise ValueError("node_count must be at least 3")
    if support not in SUPPORTS:
        raise ValueError(f"unknown support {support!r}")
    lo, hi = _T_RANGE[support]
    h = (hi - lo) / (node_count - 1)
    if support == "line":
        # Symmetric construction so an odd count puts a node exactly at 0.
        t = h * (np.arange(node_count) - 0.5 * (node_count - 1))
    else:
        t = lo + h * np.arange(node_count)
    u = 0.5 * np.pi * np.sinh(t)
    du = 0.5 * np.pi * np.cosh(t)
    if support == "line":
        x = np.sinh(u)
        w = h * du * np.cosh(u)
        name = "sinh-sinh"
    else:
        x = np.exp(u)
        w = h * du * x
        name = "exp-sinh"
    keep = w > 0  # far tails can underflow
    return QuadratureRule(support, _frozen(x[keep]), _frozen(w[keep]), name)


def _as_values(f, x, n):
    vals = np.asarray(f(x), dtype=float)
    if vals.ndim == 0:
        vals = np.full(n, float(vals))
    if vals.shape[0] != n:
        raise ValueError("vectorized callables must return one value per abscissa")
    return vals


def _check_finite(vals, x):
    flat = vals.reshape(vals.shape[0], -1)
    bad = ~np.all(np.isfinite(flat), axis=1)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise EvaluationError(f"non-finite integrand at abscissa {x[k]!r}", abscissa=x[k])


def integrate_expectation(
    integrand: Callable,
    density: Callable,
    support: str = "line",
    rule: QuadratureRule | None = None,
    loc: float = 0.0,
    scale: float = 1.0,
):
    """Integrate ``integrand * density`` over the line or the half-line ``(loc, inf)``.

    Both callables are evaluated once on the full vector of abscissae. The
    integrand may return trailing dimensions, in which case the result is an
    array of that shape.
    """
    if rule is None:
        rule = tanh_sinh_rule(400, support)
    elif rule.support != support:
        raise ValueError(f"rule support {rule.support!r} does not match {support!r}")
    x, w = rule.scaled(loc, scale)
    n = x.size
    vals = _as_values(integrand, x, n)
    _check_finite(vals, x)
    dens = _as_values(density, x, n)
    _check_finite(dens, x)
    result = np.tensordot(w * dens, vals, axes=(0, 0))
    return float(result) if result.ndim == 0 else result


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepPolicy:
    """Step-size rule for central differences."""

    base_step: float = 1e-4
    order: int = 1
    scale_mode: str = "relative"
    floor: float = 1e-6

    def __post_init__(self):
        if not self.base_step > 0:
            raise ValueError("base_step must be positive")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if self.scale_mode not in ("absolute", "relative"):
            raise ValueError("scale_mode must be 'absolute' or 'relative'")
        if not self.floor > 0:
            raise ValueError("floor must be positive")

    @classmethod
    def default(cls, order: int = 1) -> "StepPolicy":
        # Second differences lose eps/h^2, so the floor stays near eps^(1/4).
        if order == 1:
            return cls(base_step=1e-4, order=1, floor=1e-6)
        return cls(base_step=1e-4, order=2, floor=1e-4)

    def step(self, x: float) -> float:
        if self.scale_mode == "absolute":
            return self.base_step
        return max(self.base_step * abs(x), self.floor)


_STENCILS = {
    # (order, points): (offsets in units of h, coefficients, power of h)
    (1, 2): ((1, -1), (0.5, -0.5), 1),
    (1, 4): ((2, 1, -1, -2), (-1 / 12, 8 / 12, -8 / 12, 1 / 12), 1),
    (2, 3): ((1, 0, -1), (1.0, -2.0, 1.0), 2),
}


def central_difference(
    f: Callable,
    point,
    axis: int = 0,
    order: int = 1,
    policy: StepPolicy | None = None,
    bounds: Sequence | None = None,
    points: int | None = None,
):
    """Central-difference derivative of ``f`` along ``axis`` (0-based).

    ``f`` takes a coordinate vector and may return a scalar or an array.
    ``bounds`` is a per-coordinate list of open intervals ``(lo, hi)``; a
    stencil that would cross one is shrunk to half the distance to the
    boundary. ``points`` selects the stencil: 2 or 4 for first derivatives,
    3 for second derivatives.
    """
    if policy is None:
        policy = StepPolicy.default(order)
    if points is None:
        points = 2 if order == 1 else 3
    try:
        offsets, coeffs, power = _STENCILS[(order, points)]
    except KeyError:
        raise ValueError(f"no {points}-point stencil for order {order}") from None

    x0 = np.atleast_1d(np.asarray(point, dtype=float)).copy()
    if not 0 <= axis < x0.size:
        raise DomainError(f"axis {axis} out of range for a {x0.size}-vector")
    xa = x0[axis]
    h = policy.step(xa)
    reach = max(abs(o) for o in offsets)

    if bounds is not None:
        lo, hi = bounds[axis]
        if not lo < xa < hi:
            raise DomainError(f"axis {axis}: point {xa!r} outside ({lo}, {hi})")
        dist = min(xa - lo, hi - xa)
        if reach * h >= dist:
            h = 0.5 * dist / reach
        if not h > 0 or xa + h == xa:
            raise DomainError(f"axis {axis}: stencil collapses at the domain boundary")

    # Use a step that is exactly representable relative to xa.
    h = (xa + h) - xa
    total = 0.0
    for off, c in zip(offsets, coeffs):
        x = x0.copy()
        x[axis] = xa + off * h
        total = total + c * np.asarray(f(x), dtype=float)
    out = total / h**power
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


def spd_inverse(m) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix through Cholesky."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NotPositiveDefiniteError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    try:
        factor = scipy.linalg.cho_factor(m, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    inv = scipy.linalg.cho_solve(factor, np.eye(m.shape[0]))
    return 0.5 * (inv + inv.T)


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

_U64 = 2**64


@dataclass(frozen=True)
class RandomStream:
    """A (seed, stream_id) pair naming a reproducible sample sequence."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= v < _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, k: int) -> "RandomStream":
        return RandomStream(self.seed, (self.stream_id * 1_000_003 + k + 1) % _U64)


# ---------------------------------------------------------------------------
# Root search
# ---------------------------------------------------------------------------


def bracket_roots(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    scan: int = 401,
    xtol: float = 1e-12,
    touch_tol: float = 1e-9,
) -> list[float]:
    """Roots of a smooth scalar function on ``[lo, hi]`` by scan-and-bisect.

    Sign changes on a uniform scan are refined by bisection. Even-multiplicity
    roots (where ``f`` touches zero without crossing) are found by bisecting
    the central-difference derivative and kept when ``|f| <= touch_tol``.
    """
    xs = np.linspace(lo, hi, scan)
    fs = np.array([f(x) for x in xs])
    roots = []
    for k in range(scan - 1):
        a, b, fa, fb = xs[k], xs[k + 1], fs[k], fs[k + 1]
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0:
            roots.append(scipy.optimize.bisect(f, a, b, xtol=xtol))
    if fs[-1] == 0.0:
        roots.append(float(xs[-1]))

    step = (hi - lo) / (scan - 1)

    def df(x):
        return central_difference(lambda v: f(v[0]), [x], 0, 1, StepPolicy(1e-6, scale_mode="absolute"))

    ds = np.array([df(x) for x in xs[1:-1]])
    for k in range(ds.size - 1):
        a, b = xs[k + 1], xs[k + 2]
        if ds[k] * ds[k + 1] < 0 and fs[k + 1] * fs[k + 2] > 0:
            x = scipy.optimize.bisect(df, a, b, xtol=xtol)
            if abs(f(x)) <= touch_tol and all(abs(x - r) > step for r in roots):
                roots.append(x)
    return sorted(roots)
