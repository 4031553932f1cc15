"""
spde-limits

Pseudospectral simulation of stochastic Cahn-Hilliard/Allen-Cahn type
equations on the 2-torus and Monte Carlo checks of their renormalized
Allen-Cahn limit.
"""

# Version is managed by hatch-vcs from git tags
try:
    from ._version import __version__
except ImportError:
    try:
        from importlib.metadata import PackageNotFoundError, version

        try:
            __version__ = version("spde-limits")
        except PackageNotFoundError:
            __version__ = "0.0.0.dev0+unknown"
    except ImportError:
        __version__ = "0.0.0.dev0+unknown"

from .models import Model, ModelSpec, Mollifier, SigmaKind, SigmaSchedule
from .noise import NoiseSeed
from .solver import Scheme, SolveConfig, solve_coupled, solve_limit
from .spectral import FourierGrid, RealField, SpectralField, forward, inverse

__all__ = [
    "FourierGrid",
    "Model",
    "ModelSpec",
    "Mollifier",
    "NoiseSeed",
    "RealField",
    "Scheme",
    "SigmaKind",
    "SigmaSchedule",
    "SolveConfig",
    "SpectralField",
    "__version__",
    "forward",
    "inverse",
    "solve_coupled",
    "solve_limit",
]
