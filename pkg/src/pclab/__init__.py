"""Compliance minimisation with glued Dirichlet sets for the p-Laplacian."""
from .config import RunConfig
from .errors import PclabError

__version__ = "0.1.0"

__all__ = ["RunConfig", "PclabError", "__version__"]
