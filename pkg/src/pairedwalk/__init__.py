"""Paired quantum walks converging to the (1+1)-dimensional curved-space Dirac equation."""

from importlib import metadata as _metadata

from .errors import PairedWalkError
from .lattice import FineState, LatticeWalk, PairedState, evolve, gaussian_wavepacket, pair, unpair
from .spacetime import MetricSpec, dirac_matching, flat, schwarzschild, tabulated
from .synthesis import WalkOperators, finite_walk, synthesize, synthesize_point

try:
    __version__ = _metadata.version("artifact")
except _metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = [
    "FineState",
    "LatticeWalk",
    "MetricSpec",
    "PairedState",
    "PairedWalkError",
    "WalkOperators",
    "dirac_matching",
    "evolve",
    "finite_walk",
    "flat",
    "gaussian_wavepacket",
    "pair",
    "schwarzschild",
    "synthesize",
    "synthesize_point",
    "tabulated",
    "unpair",
    "__version__",
]
