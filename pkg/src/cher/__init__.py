"""Canonical Hamiltonian-ensemble representation (CHER) of pure-dephasing dynamics and its nonclassicality."""

from .dephasing import ChiSeries, DephasingFactors, DynamicalMapSeries
from .lie import GENERATOR_ORDER, build_generators, root_system
from .measure import (
    NonclassicalityResult,
    nonclassicality_lp,
    nonclassicality_negativity,
    nonclassicality_of_dynamics,
    variational_distance,
)
from .retrieval import QuasiDistribution, forward_transform, invert_1d, invert_pair_correlated

__version__ = "0.1.0"

__all__ = [
    "GENERATOR_ORDER",
    "ChiSeries",
    "DephasingFactors",
    "DynamicalMapSeries",
    "NonclassicalityResult",
    "QuasiDistribution",
    "build_generators",
    "forward_transform",
    "invert_1d",
    "invert_pair_correlated",
    "nonclassicality_lp",
    "nonclassicality_negativity",
    "nonclassicality_of_dynamics",
    "root_system",
    "variational_distance",
]
