"""Unit-variance Gaussian location family.

Its Fisher metric is the constant 1, so every connection and curvature
vanishes. With ``analytic=False`` it declares no derivatives, which
exercises the finite-difference score and hessian paths.
"""

from __future__ import annotations

import math

import numpy as np

from ..core import StatisticalFamily

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class GaussianLocationFamily(StatisticalFamily):
    param_dim = 1
    sample_dim = 1
    support = "line"
    charts = ("location",)

    def __init__(self, analytic: bool = True):
        self.name = "gauss-location"
        if analytic:
            self._analytic_score = self._score
            self._analytic_hessian = self._hessian

    @staticmethod
    def _score(x, coords, chart):
        return np.reshape(x, (-1, 1)) - coords[0]

    @staticmethod
    def _hessian(x, coords, chart):
        return -np.ones((np.size(x), 1, 1))

    def quadrature_frame(self, point):
        return np.array([point.coords[0]]), np.ones(1)

    def _log_density(self, x, coords, chart):
        return -_HALF_LOG_2PI - 0.5 * (x - coords[0]) ** 2

    def sample(self, point, n, stream):
        return point.coords[0] + stream.generator().standard_normal(n)
