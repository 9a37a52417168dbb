"""Alpha-geometry of a statistical family: metric, skewness tensor,
connections and curvature, all computed through an expectation engine.

Index conventions (0-based arrays):

* ``T[i, j, k] = E[d_i l d_j l d_k l]``
* ``Gamma[i, j, k] = Gamma_ijk`` with the lowered index last; raised
  connections store ``Gamma^k_ij`` at ``[i, j, k]``.
* ``R[i, h, j, k]`` is the curvature with the derivative pair ``(i, h)``.
  Its sign is chosen so that the Gaussian manifold has K^(0) = -1/2, i.e.
  ``R_ihjk = -g_lk (d_i G^l_hj - d_h G^l_ij + G^l_im G^m_hj - G^l_hm G^m_ij)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    ExpectationEngine,
    ParameterPoint,
    StatisticalFamily,
    _hessian_batch,
    _score_batch,
    expectation_nodes,
)
from .errors import DomainError, UnsupportedEngineError
from .numerics import StepPolicy, central_difference
from .tensors import MetricTensor, Tensor3, Tensor4

__all__ = [
    "ScoreMoments",
    "score_moments",
    "fisher_metric",
    "fisher_metric_outer",
    "skewness_tensor",
    "one_connection",
    "alpha_connection",
    "levi_civita",
    "raise_connection",
    "AlphaCurvature",
    "curvature_tensor",
    "gaussian_curvature",
    "CurvatureReport",
    "curvature_report",
    "FlatnessVerdict",
    "is_alpha_flat",
]

CURVATURE_SIGN = -1.0
_CHUNK = 2**16


def _default_engine(engine):
    return ExpectationEngine.quadrature() if engine is None else engine


def _default_policy(policy):
    return StepPolicy.default(1) if policy is None else policy


@dataclass(frozen=True, eq=False)
class ScoreMoments:
    """Everything one pass over the expectation nodes yields.

    ``stderr`` maps field names to standard errors for monte-carlo engines
    and is ``None`` otherwise.
    """

    point: ParameterPoint
    metric: np.ndarray  # -E[hessian]
    outer: np.ndarray  # E[score score]
    skewness: np.ndarray  # E[score score score]
    one_connection: np.ndarray  # E[hessian score]
    mean_score: np.ndarray
    normalization: float
    stderr: Optional[dict] = None


def _closed_moments(family, point):
    g = family.closed_metric(point).components
    p = g.shape[0]
    return ScoreMoments(
        point,
        g,
        g,
        family.closed_skewness(point).components,
        family.closed_one_connection(point).components,
        np.zeros(p),
        1.0,
    )


def score_moments(family: StatisticalFamily, point: ParameterPoint, engine: ExpectationEngine | None = None):
    """Metric (both routes), skewness tensor and 1-connection in one pass."""
    engine = _default_engine(engine)
    family.validate(point)
    if engine.kind == "closed-form":
        return _closed_moments(family, point)

    x, w = expectation_nodes(engine, family, point, even=family.even_scores)
    p = family.param_dim
    keys = ("h", "ss", "sss", "hs", "s", "one")
    acc = {k: 0.0 for k in keys}
    acc2 = {k: 0.0 for k in keys} if engine.kind == "monte-carlo" else None
    for start in range(0, w.size, _CHUNK):
        xs, ws = x[start : start + _CHUNK], w[start : start + _CHUNK]
        s = _score_batch(family, point, xs)
        h = _hessian_batch(family, point, xs)
        vals = {
            "h": h,
            "ss": s[:, :, None] * s[:, None, :],
            "sss": s[:, :, None, None] * s[:, None, :, None] * s[:, None, None, :],
            "hs": h[:, :, :, None] * s[:, None, None, :],
            "s": s,
            "one": np.ones(ws.size),
        }
        for k, v in vals.items():
            if not np.all(np.isfinite(v)):
                bad = int(np.argmin(np.all(np.isfinite(v.reshape(ws.size, -1)), axis=1)))
                raise DomainError(f"{family.name}: non-finite integrand at sample {np.asarray(xs[bad]).tolist()}")
            acc[k] = acc[k] + np.tensordot(ws, v, axes=(0, 0))
            if acc2 is not None:
                acc2[k] = acc2[k] + np.tensordot(ws, v * v, axes=(0, 0))

    stderr = None
    if acc2 is not None:
        n = w.size
        stderr = {
            k: np.sqrt(np.maximum(acc2[k] - np.asarray(acc[k]) ** 2, 0.0) * n / max(n - 1, 1) / n) for k in keys
        }
        stderr = {
            "metric": stderr["h"],
            "outer": stderr["ss"],
            "skewness": stderr["sss"],
            "one_connection": stderr["hs"],
            "mean_score": stderr["s"],
            "normalization": float(stderr["one"]),
        }
    h = np.asarray(acc["h"]).reshape(p, p)
    return ScoreMoments(
        point,
        -0.5 * (h + h.T),
        np.asarray(acc["ss"]).reshape(p, p),
        np.asarray(acc["sss"]).reshape(p, p, p),
        np.asarray(acc["hs"]).reshape(p, p, p),
        np.asarray(acc["s"]).reshape(p),
        float(acc["one"]),
        stderr,
    )


def fisher_metric(family, point, engine=None) -> MetricTensor:
    """g_ij = -E[d_i d_j l]."""
    m = score_moments(family, point, engine)
    return MetricTensor(m.metric, point)


def fisher_metric_outer(family, point, engine=None) -> MetricTensor:
    """g_ij = E[d_i l d_j l], the second route to the same metric."""
    m = score_moments(family, point, engine)
    return MetricTensor(0.5 * (m.outer + m.outer.T), point)


def skewness_tensor(family, point, engine=None) -> Tensor3:
    """T_ijk = E[d_i l d_j l d_k l]."""
    return Tensor3(score_moments(family, point, engine).skewness, "full")


def one_connection(family, point, engine=None) -> Tensor3:
    """Gamma^(1)_ijk = E[d_i d_j l d_k l]."""
    return Tensor3(score_moments(family, point, engine).one_connection, "first-two")


def alpha_connection(one_conn: Tensor3, skew: Tensor3, alpha: float) -> Tensor3:
    """Gamma^(alpha) = Gamma^(1) + (1 - alpha)/2 T."""
    if one_conn.components.shape != skew.components.shape:
        raise ValueError(f"dimension mismatch: {one_conn.components.shape} vs {skew.components.shape}")
    if alpha == 1:
        return Tensor3(one_conn.components, "first-two")
    return Tensor3(one_conn.components + 0.5 * (1.0 - alpha) * skew.components, "first-two")


def raise_connection(conn: Tensor3, metric: MetricTensor) -> Tensor3:
    """Gamma^k_ij = g^km Gamma_ijm."""
    if conn.raised:
        raise ValueError("connection is already raised")
    if conn.p != metric.p:
        raise ValueError(f"dimension mismatch: connection p={conn.p}, metric p={metric.p}")
    raised = np.einsum("ijm,mk->ijk", conn.components, metric.inverse)
    return Tensor3(raised, conn.symmetry if conn.symmetry != "full" else "first-two", raised=True)


def _field_derivatives(field, point, bounds, policy):
    """d_a field for every coordinate axis, stacked on a new leading axis."""
    return np.stack(
        [central_difference(field, point.array, a, 1, policy, bounds, points=4) for a in range(len(point))]
    )


def levi_civita(family, point, engine=None, policy: StepPolicy | None = None) -> Tensor3:
    """Metric connection Gamma_ijk = 1/2 (d_j g_ki + d_i g_kj - d_k g_ij).

    Metric derivatives are 4-point central differences of the engine's
    metric field.
    """
    engine = _default_engine(engine)
    policy = _default_policy(policy)
    family.validate(point)
    bounds = family.param_bounds(point.chart)

    def g_field(c):
        return score_moments(family, point.with_coords(c), engine).metric

    dg = _field_derivatives(g_field, point, bounds, policy)  # dg[a, i, j] = d_a g_ij
    gamma = 0.5 * (
        np.einsum("jki->ijk", dg) + np.einsum("ikj->ijk", dg) - np.einsum("kij->ijk", dg)
    )
    return Tensor3(gamma, "first-two")


class AlphaCurvature:
    """Curvature of the whole alpha-family of connections at one point.

    The raised 1-connection and raised skewness fields are differentiated
    once; any alpha is then a cheap linear combination.
    """

    def __init__(self, family, point, engine=None, policy: StepPolicy | None = None):
        self.family = family
        self.point = point
        self.engine = _default_engine(engine)
        self.policy = _default_policy(policy)
        family.validate(point)
        bounds = family.param_bounds(point.chart)

        center = score_moments(family, point, self.engine)
        self.moments = center
        self.metric = MetricTensor(center.metric, point)
        self._u1, self._ut = self._raised_pair(center, self.metric)

        def field(c):
            m = score_moments(family, point.with_coords(c), self.engine)
            u1, ut = self._raised_pair(m, MetricTensor(m.metric))
            return np.stack([u1, ut])

        d = _field_derivatives(field, point, bounds, self.policy)  # d[a, 0|1, i, j, k]
        self._du1 = d[:, 0]
        self._dut = d[:, 1]

    @staticmethod
    def _raised_pair(m, metric):
        ginv = metric.inverse
        return (
            np.einsum("ijm,mk->ijk", m.one_connection, ginv),
            np.einsum("ijm,mk->ijk", m.skewness, ginv),
        )

    def connection(self, alpha: float) -> Tensor3:
        return Tensor3(self.moments.one_connection + 0.5 * (1 - alpha) * self.moments.skewness, "first-two")

    def raised(self, alpha: float) -> Tensor3:
        return Tensor3(self._u1 + 0.5 * (1 - alpha) * self._ut, "first-two", raised=True)

    def tensor(self, alpha: float) -> Tensor4:
        c = 0.5 * (1 - alpha)
        G = self._u1 + c * self._ut  # G[i, j, l] = Gamma^l_ij
        dG = self._du1 + c * self._dut  # dG[a, i, j, l] = d_a Gamma^l_ij
        # A[i, h, j, l] = d_i Gamma^l_hj + Gamma^l_im Gamma^m_hj
        A = dG + np.einsum("iml,hjm->ihjl", G, G)
        R_up = A - A.transpose(1, 0, 2, 3)
        R = CURVATURE_SIGN * np.einsum("ihjl,lk->ihjk", R_up, self.metric.components)
        return Tensor4(R, float(alpha))

    def gaussian_curvature(self, alpha: float) -> float:
        return gaussian_curvature(self.tensor(alpha), self.metric)


def curvature_tensor(family, point, alpha: float, engine=None, policy=None) -> Tensor4:
    """R^(alpha)_ihjk by finite differences of the raised connection field."""
    return AlphaCurvature(family, point, engine, policy).tensor(alpha)


def gaussian_curvature(tensor: Tensor4, metric: MetricTensor) -> float:
    """K = R_1212 / det g (two-dimensional manifolds only)."""
    if tensor.p != 2 or metric.p != 2:
        raise UnsupportedEngineError(f"Gaussian curvature needs p = 2, got p = {tensor.p}")
    return float(tensor.components[0, 1, 0, 1] / metric.det)


@dataclass(frozen=True, eq=False)
class CurvatureReport:
    point: ParameterPoint
    alpha: float
    tensor: Tensor4
    gaussian_curvature: Optional[float]
    max_abs_component: float


def curvature_report(family, point, alpha, engine=None, policy=None) -> CurvatureReport:
    ac = AlphaCurvature(family, point, engine, policy)
    t = ac.tensor(alpha)
    k = gaussian_curvature(t, ac.metric) if t.p == 2 else None
    return CurvatureReport(point, float(alpha), t, k, t.max_abs)


@dataclass(frozen=True)
class FlatnessVerdict:
    flat: bool
    max_abs: float
    worst_point: ParameterPoint
    worst_alpha: float


def is_alpha_flat(
    family,
    alpha,
    grid: Sequence[ParameterPoint],
    tol: float,
    engine=None,
    policy=None,
) -> FlatnessVerdict:
    """Whether every R^(alpha) component stays within ``tol`` over ``grid``.

    ``alpha`` may be a single value or a sequence; connection fields are
    differentiated once per grid point and shared across alphas.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("grid must contain at least one point")
    alphas = [float(alpha)] if np.ndim(alpha) == 0 else [float(a) for a in alpha]
    worst = (-math.inf, grid[0], alphas[0])
    for pt in grid:
        ac = AlphaCurvature(family, pt, engine, policy)
        for a in alphas:
            m = ac.tensor(a).max_abs
            if m > worst[0]:
                worst = (m, pt, a)
    return FlatnessVerdict(bool(worst[0] <= tol), float(worst[0]), worst[1], worst[2])
