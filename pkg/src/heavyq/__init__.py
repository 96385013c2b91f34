"""Capacity planning for many-server queues with hyper-exponential service.

The package sizes server pools for four quality-of-service classes (zero,
minimal, bounded, and probabilistic waiting time), exposes the square-root
staffing kernel behind them, and ships a discrete-event simulator plus a CLI
for generating the planning curves and validation sweeps as CSV files.
"""

from .halfin_whitt import HwSolution, hw_delay_probability, hw_solve_psi, normal_cdf, normal_pdf
from .models import (
    HyperExpService,
    RenewalArrival,
    RngStream,
    sample_interarrival,
    sample_service,
    service_moments,
    split_cv,
)
from .planner import (
    BoundedWait,
    LevyUpperBound,
    MinimalWait,
    MwtBounds,
    NormalizedQueueDensity,
    ProbabilisticWait,
    QosRequirement,
    SizingResult,
    ZeroWait,
    bwt_tau,
    kingman_wait_tail,
    machines_for,
    machines_for_rate,
    mwt_bounds,
    mwt_upper_levy,
    mwt_upper_optimized,
    mwt_upper_poisson,
    pwt_gamma,
    tightness_ratio,
)
from .simulate import (
    SimConfig,
    SimMetrics,
    SimulationError,
    SplitConfig,
    SplitMetrics,
    ValidationRow,
    simulate,
    simulate_split,
    validate_class,
)

__version__ = "0.1.0"

__all__ = [
    "BoundedWait",
    "HwSolution",
    "HyperExpService",
    "LevyUpperBound",
    "MinimalWait",
    "MwtBounds",
    "NormalizedQueueDensity",
    "ProbabilisticWait",
    "QosRequirement",
    "RenewalArrival",
    "RngStream",
    "SimConfig",
    "SimMetrics",
    "SimulationError",
    "SizingResult",
    "SplitConfig",
    "SplitMetrics",
    "ValidationRow",
    "ZeroWait",
    "bwt_tau",
    "hw_delay_probability",
    "hw_solve_psi",
    "kingman_wait_tail",
    "machines_for",
    "machines_for_rate",
    "mwt_bounds",
    "mwt_upper_levy",
    "mwt_upper_optimized",
    "mwt_upper_poisson",
    "normal_cdf",
    "normal_pdf",
    "pwt_gamma",
    "sample_interarrival",
    "sample_service",
    "service_moments",
    "simulate",
    "simulate_split",
    "split_cv",
    "tightness_ratio",
    "validate_class",
]
