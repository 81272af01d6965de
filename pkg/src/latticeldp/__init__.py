"""Rare-event toolkit for a two-species lattice jump process.

Exact trajectory simulation, excursion rate functionals, the density of the
process against a free reference walk, and importance-sampling verification
that tube and strip probabilities decay like exp(-T**2 * I(target)).
"""
from .config import ConfigError, ExperimentConfig, load_experiment_config
from .estimate import (
    ConsistencyReport,
    EstimateResult,
    ScalingStudyResult,
    consistency_check,
    estimate_event_is,
    estimate_event_naive,
    estimate_event_zeta,
    estimate_events_is,
    estimate_strip,
    scaling_study,
)
from .functional import (
    PathFunctionals,
    a_functional,
    b_functional,
    lemma_bt_bound_check,
    log_density_wrt_zeta,
    reference_log_weight,
    path_functionals,
)
from .model import (
    DOWN1,
    DOWN2,
    JOINT,
    JUMPS,
    UP1,
    UP2,
    JumpVector,
    LatticeState,
    RateParams,
    jump_intensity,
    jump_probabilities,
    total_rate,
)
from .paths import (
    EventSpec,
    PiecewiseLinearPath,
    ScaledView,
    StepTrajectory,
    count_up_down,
    in_event,
    rate_functional,
    rate_integral,
    strip_inf_rate,
    uniform_distance,
    validate_target,
)
from .simulate import (
    GuidedProposal,
    RngStream,
    build_guided_proposal,
    guided_log_weight,
    identity_proposal,
    simulate_guided,
    simulate_pulled,
    simulate_xi,
    simulate_zeta,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "JUMPS",
    "UP1",
    "UP2",
    "DOWN1",
    "DOWN2",
    "JOINT",
    "JumpVector",
    "LatticeState",
    "RateParams",
    "jump_intensity",
    "jump_probabilities",
    "total_rate",
    "PiecewiseLinearPath",
    "StepTrajectory",
    "ScaledView",
    "EventSpec",
    "validate_target",
    "uniform_distance",
    "in_event",
    "rate_integral",
    "rate_functional",
    "strip_inf_rate",
    "count_up_down",
    "RngStream",
    "GuidedProposal",
    "simulate_xi",
    "simulate_zeta",
    "simulate_guided",
    "simulate_pulled",
    "guided_log_weight",
    "build_guided_proposal",
    "identity_proposal",
    "a_functional",
    "b_functional",
    "log_density_wrt_zeta",
    "reference_log_weight",
    "PathFunctionals",
    "path_functionals",
    "lemma_bt_bound_check",
    "EstimateResult",
    "ScalingStudyResult",
    "ConsistencyReport",
    "estimate_event_naive",
    "estimate_event_is",
    "estimate_events_is",
    "estimate_event_zeta",
    "estimate_strip",
    "consistency_check",
    "scaling_study",
    "ExperimentConfig",
    "ConfigError",
    "load_experiment_config",
]
