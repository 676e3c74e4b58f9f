"""Differential-game solver for multidimensional opinion dynamics.

Assembles the game matrix from influence/stubbornness weights, decides
Nash-equilibrium existence, evaluates the equilibrium trajectories in
closed form, and runs seeded multi-stage scenarios over random networks.
"""

__version__ = "0.1.0"

from .game import (InadmissibleWeightsError, GameSpec, NashSolution,
                   NoNashEquilibriumError, QAssembly, TrajectorySample,
                   assemble, check_existence, infinite_horizon_state,
                   long_run_limit, solve)
from .matfun import (CriticalTimes, SpectralInfo, f_singularity, series_f,
                     series_g, series_h, spectral, sqrt_positive_real)
from .weights import AgentProfile, build_influence_root, build_stubbornness, \
    square_to_weight, validate_weights

__all__ = [
    "__version__",
    "AgentProfile",
    "InadmissibleWeightsError",
    "CriticalTimes",
    "GameSpec",
    "NashSolution",
    "NoNashEquilibriumError",
    "QAssembly",
    "SpectralInfo",
    "TrajectorySample",
    "assemble",
    "build_influence_root",
    "build_stubbornness",
    "check_existence",
    "f_singularity",
    "infinite_horizon_state",
    "long_run_limit",
    "series_f",
    "series_g",
    "series_h",
    "solve",
    "spectral",
    "sqrt_positive_real",
    "square_to_weight",
    "validate_weights",
]
