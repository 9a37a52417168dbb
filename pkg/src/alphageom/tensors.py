"""Value types for metrics, connection coefficients and curvature tensors.

Arrays are 0-based: ``components[i, j, k]`` holds the coefficient written
with indices ``(i+1, j+1, k+1)`` in the usual 1-based notation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateMetricError, NotPositiveDefiniteError
from .numerics import spd_inverse

SYMMETRY_CLASSES = ("full", "first-two", "none")


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MetricTensor:
    """Fisher metric at a point; symmetric positive definite."""

    components: np.ndarray
    point: Optional[object] = None

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.components, dtype=float))
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"metric must be square, got shape {g.shape}")
        scale = max(1.0, float(np.max(np.abs(g))))
        if np.max(np.abs(g - g.T)) > 1e-10 * scale:
            raise DegenerateMetricError("metric is not symmetric")
        g = 0.5 * (g + g.T)
        try:
            inv = spd_inverse(g)
        except NotPositiveDefiniteError as exc:
            raise DegenerateMetricError(f"metric is not positive definite: {g.tolist()}") from exc
        object.__setattr__(self, "components", _readonly(g))
        object.__setattr__(self, "_inverse", _readonly(inv))

    @property
    def p(self) -> int:
        return self.components.shape[0]

    @property
    def inverse(self) -> np.ndarray:
        return self._inverse

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.components))


@dataclass(frozen=True, eq=False)
class Tensor3:
    """Rank-3 coefficients such as T_ijk or Gamma_ijk.

    When ``raised`` is true the last index is the contravariant one, i.e.
    ``components[i, j, k]`` is Gamma^k_ij.
    """

    components: np.ndarray
    symmetry: str = "none"
    raised: bool = False

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        if c.ndim != 3 or len(set(c.shape)) != 1:
            raise ValueError(f"expected a p x p x p array, got shape {c.shape}")
        if self.symmetry not in SYMMETRY_CLASSES:
            raise ValueError(f"unknown symmetry class {self.symmetry!r}")
        object.__setattr__(self, "components", _readonly(c))

    @property
    def p(self) -> int:
        return self.components.shape[0]

    def symmetry_defect(self) -> float:
        """Largest violation of the declared symmetry class."""
        c = self.components
        if self.symmetry == "none":
            return 0.0
        defect = np.max(np.abs(c - c.transpose(1, 0, 2)))
        if self.symmetry == "full":
            defect = max(defect, np.max(np.abs(c - c.transpose(0, 2, 1))))
        return float(defect)

    def __getitem__(self, idx):
        return self.components[idx]


@dataclass(frozen=True, eq=False)
class Tensor4:
    """Curvature components ``components[i, h, j, k] = R_ihjk`` at one alpha."""

    components: np.ndarray
    alpha: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        if c.ndim != 4 or len(set(c.shape)) != 1:
            raise ValueError(f"expected a p^4 array, got shape {c.shape}")
        object.__setattr__(self, "components", _readonly(c))

    @property
    def p(self) -> int:
        return self.components.shape[0]

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.components))) if self.components.size else 0.0

    def antisymmetry_defect(self) -> float:
        c = self.components
        return float(np.max(np.abs(c + c.transpose(1, 0, 2, 3))))

    def __getitem__(self, idx):
        return self.components[idx]
