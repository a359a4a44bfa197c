"""Tabular mean-field-game learning along a single sample path.

A generic agent estimates the population distribution and its own optimal
policy concurrently from one trajectory, without a population simulator; an
exact-operator subsystem solves for the reference Boltzmann equilibrium and
scores the learner against it.
"""

from .core import (
    MeanField,
    Policy,
    QTable,
    StateActionDims,
    frobenius_norm,
    inf_norm,
    l1_norm,
    softmax_policy,
    tv_norm,
)
from .environment import (
    CongestionGridParams,
    MfgEnvironment,
    env_step,
    make_congestion_env,
    make_fixed_mdp_env,
    make_two_class_env,
)
from .estimators import QLearner, TransitionCounter
from .oracle import (
    BmfePair,
    ContractionEstimate,
    DiagnosticsOracle,
    gamma1_lambda,
    gamma2,
    induced_kernel,
    induced_q_star,
    make_diagnostics_oracle,
    probe_contraction,
    solve_bmfe,
)
from .sandbox import (
    EpisodeDiagnostics,
    NonFiniteError,
    SandboxConfig,
    SandboxResult,
    episode_diagnostics,
    run_sandbox,
    update_mean_field,
    update_policy,
)
from .schedules import (
    EpsilonNet,
    ScheduleParams,
    build_epsilon_net,
    exploration_coeff,
    exploration_floor,
    project_to_net,
    step_size_mu,
    step_size_pi,
)

__all__ = [
    "BmfePair",
    "CongestionGridParams",
    "ContractionEstimate",
    "DiagnosticsOracle",
    "EpisodeDiagnostics",
    "EpsilonNet",
    "MeanField",
    "MfgEnvironment",
    "NonFiniteError",
    "Policy",
    "QLearner",
    "QTable",
    "SandboxConfig",
    "SandboxResult",
    "ScheduleParams",
    "StateActionDims",
    "TransitionCounter",
    "build_epsilon_net",
    "env_step",
    "episode_diagnostics",
    "exploration_coeff",
    "exploration_floor",
    "frobenius_norm",
    "gamma1_lambda",
    "gamma2",
    "induced_kernel",
    "induced_q_star",
    "inf_norm",
    "l1_norm",
    "make_congestion_env",
    "make_diagnostics_oracle",
    "make_fixed_mdp_env",
    "make_two_class_env",
    "probe_contraction",
    "project_to_net",
    "run_sandbox",
    "softmax_policy",
    "solve_bmfe",
    "step_size_mu",
    "step_size_pi",
    "tv_norm",
    "update_mean_field",
    "update_policy",
]
