"""Differentiable gene regulatory networks with Baldwinian evolution."""

from .dynamics import GrnState, SignatureSet, compute_signatures, influence, reset, run, step
from .genome import Bounds, Genome, Kind, Protein

__all__ = [
    "Bounds",
    "Genome",
    "GrnState",
    "Kind",
    "Protein",
    "SignatureSet",
    "compute_signatures",
    "influence",
    "reset",
    "run",
    "step",
]
