"""Blurring functional mean shift clustering for curves sampled on a common grid."""

from .clustering import ClusterResult, assign_clusters, check_separation, stability_experiment
from .exceptions import (
    BFMSError,
    CoincidentPoint,
    GridMismatch,
    InsufficientData,
    InvalidExperiment,
    InvalidPartition,
    TooFewKnots,
    ZeroMass,
)
from .fspace import FunctionSample, FunctionSet, GridSpec, l2_dist, l2_inner, weighted_mean
from .full import (
    RunConfig,
    RunTrace,
    average_density,
    bfms_step,
    ms_operator,
    nbfms_step,
    run_full,
    surrogate_density,
)
from .kernel import BandwidthSchedule, KernelConfig, estimate_tau, kernel_eval, schedule_bandwidth
from .stochastic import (
    PartitionPlan,
    StochasticConfig,
    make_partition,
    one_step_approximation_experiment,
    run_stochastic,
    subset_density,
    subset_ms_operator,
)

from .synth import bump_centers, make_bump_clusters

__version__ = "0.1.0"
