"""Exact and simulated maxima of hierarchical Bernoulli summation schemes."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("helixmax")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

from .core import BudgetExceeded, DomainError, G_map, LatticePmf, TailFunction, g_map
from .exact import evolve, joint_evolve, step_tail
from .helix import HelixElement, cyclic_distance_curve, find_limit_point

__all__ = [
    "BudgetExceeded",
    "DomainError",
    "G_map",
    "HelixElement",
    "LatticePmf",
    "TailFunction",
    "cyclic_distance_curve",
    "evolve",
    "find_limit_point",
    "g_map",
    "joint_evolve",
    "step_tail",
    "__version__",
]
