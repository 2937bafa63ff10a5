"""Dirichlet-Laplace shrinkage for sparse normal means."""

from .rngdist import InvalidParameterError, RngStream

__version__ = "0.1.0"

__all__ = ["InvalidParameterError", "RngStream", "__version__"]
