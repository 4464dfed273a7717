"""Approximate Bloch waves and effective flows for quasiperiodic Schrödinger operators."""

__version__ = "0.1.0"

from .errors import (
    BNFError,
    BoundaryContamination,
    CombinatorialLimit,
    Contaminated,
    GridMismatch,
    GridTooSmall,
    MagnitudeOverflow,
    MissingJet,
    NumericalGuard,
    RationalDirection,
    ResonantFiber,
    ScenarioError,
)
from .potential import TrigPolynomial, WindingMatrix

__all__ = [
    "BNFError", "BoundaryContamination", "CombinatorialLimit", "Contaminated", "GridMismatch",
    "GridTooSmall", "MagnitudeOverflow", "MissingJet", "NumericalGuard", "RationalDirection",
    "ResonantFiber", "ScenarioError", "TrigPolynomial", "WindingMatrix", "__version__",
]
