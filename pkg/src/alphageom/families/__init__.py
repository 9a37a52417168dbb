"""Statistical families with closed-form geometry."""

from .generalized_gaussian import *  # noqa: F401,F403
from .generalized_gaussian import __all__ as _gg_all
from .location import GaussianLocationFamily
from .orthant import *  # noqa: F401,F403
from .orthant import __all__ as _m2_all

__all__ = [*_gg_all, *_m2_all, "GaussianLocationFamily"]
