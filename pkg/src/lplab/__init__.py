"""Desk-scale numerical laboratory for weighted multilinear square-function inequalities."""
from .gridfn import DomainSpec, GridFunction

__version__ = "0.1.0"
__all__ = ["DomainSpec", "GridFunction", "__version__"]
