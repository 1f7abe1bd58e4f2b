"""Random plane trees, their loop graphs, and conditioned walk couplings."""

from . import errors
from .backend import current_backend, set_backend
from .rng import RandomSource, Stream

__version__ = "0.1.0"

__all__ = [
    "errors",
    "current_backend",
    "set_backend",
    "RandomSource",
    "Stream",
    "__version__",
]
