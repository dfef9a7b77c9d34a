"""Change-in-slope segmentation by penalized least squares on a state grid.

Fits continuous piecewise-linear signals whose breakpoint values live on a
finite grid, with optional shape constraints (isotonic, unimodal, minimum
interior angle) and candidate pruning for speed.
"""

from .constraints import ConstraintSpec, interior_angle
from .core import (
    ConfigError,
    GuardError,
    ParseError,
    PrefixSums,
    Segmentation,
    StateGrid,
    TimeSeries,
    build_prefix_sums,
    segment_cost_fast,
    segment_cost_naive,
)
from .dp import (
    DPTables,
    SolverConfig,
    backtrack,
    brute_force_oracle,
    evaluate_segmentation,
    slope_op,
    slope_op_fixed_k,
    solve,
    warm_up,
)
from .pruning import PruningSpec, unpruned_couples
from .simulation import (
    ExperimentReport,
    NoiseSpec,
    SignalSpec,
    add_noise,
    generate_signal,
    mse,
    penalty_scan,
    pruning_efficiency_scan,
    ramp_profile,
    reconstruct_signal,
    robustness_scan,
    timing_scan,
)
from .variance import (
    HallCoefficients,
    default_penalty,
    hall_diff_estimator,
    hall_estimator,
    mad_estimator,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConstraintSpec",
    "DPTables",
    "ExperimentReport",
    "GuardError",
    "HallCoefficients",
    "NoiseSpec",
    "ParseError",
    "PrefixSums",
    "PruningSpec",
    "Segmentation",
    "SignalSpec",
    "SolverConfig",
    "StateGrid",
    "TimeSeries",
    "add_noise",
    "backtrack",
    "brute_force_oracle",
    "build_prefix_sums",
    "default_penalty",
    "evaluate_segmentation",
    "generate_signal",
    "hall_diff_estimator",
    "hall_estimator",
    "interior_angle",
    "mad_estimator",
    "mse",
    "penalty_scan",
    "pruning_efficiency_scan",
    "ramp_profile",
    "reconstruct_signal",
    "robustness_scan",
    "segment_cost_fast",
    "segment_cost_naive",
    "slope_op",
    "slope_op_fixed_k",
    "solve",
    "timing_scan",
    "unpruned_couples",
    "warm_up",
]
