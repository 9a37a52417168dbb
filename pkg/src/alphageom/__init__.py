"""Alpha-geometry of statistical manifolds."""

__version__ = "0.1.0"
