"""Maximum entropy goal-directedness for finite-horizon tabular MDPs."""
from .mdp import (
    DimensionError,
    MdpError,
    Policy,
    TabularMdp,
    TrajectorySet,
    UtilityRange,
    attainable_range,
    causal_entropy,
    epsilon_greedy,
    expected_utility,
    occupancy,
    sample_trajectories,
    validate,
    value_iteration,
)
from .meg import (
    MegOptions,
    MegResult,
    meg_known,
    meg_known_from_trajectories,
    meg_target_state,
    meg_unknown,
    meg_unknown_from_trajectories,
    predictive_accuracy,
    signed_meg,
)
from .soft_q import SoftQ, log_soft_policy, soft_policy, soft_value_iteration
from .utility_models import ParametricUtility

__all__ = [
    "DimensionError", "MdpError", "Policy", "TabularMdp", "TrajectorySet", "UtilityRange",
    "attainable_range", "causal_entropy", "epsilon_greedy", "expected_utility", "occupancy",
    "sample_trajectories", "validate", "value_iteration",
    "MegOptions", "MegResult", "meg_known", "meg_known_from_trajectories", "meg_target_state",
    "meg_unknown", "meg_unknown_from_trajectories", "predictive_accuracy", "signed_meg",
    "SoftQ", "log_soft_policy", "soft_policy", "soft_value_iteration", "ParametricUtility",
]
