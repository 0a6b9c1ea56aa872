"""
Regularizing sequential subspace optimization for inverse problems whose forward
operator is only known up to a bounded, per-subproblem model error.
"""
from resesop.definitions import (
    Engine,
    ImageGrid,
    InexactnessMode,
    MeasurementVector,
    SubproblemPartition,
)
from resesop.solver import (
    InexactnessProfile,
    ProblemConfig,
    ResesopResult,
    run_resesop,
)

__version__ = "0.3.0"

__all__ = [
    "Engine",
    "ImageGrid",
    "InexactnessMode",
    "MeasurementVector",
    "SubproblemPartition",
    "InexactnessProfile",
    "ProblemConfig",
    "ResesopResult",
    "run_resesop",
]
