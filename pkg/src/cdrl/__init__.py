"""Tabular categorical distributional reinforcement learning."""

__version__ = "0.1.0"

from .measures import (
    CategoricalDistribution,
    FiniteDistribution,
    ParameterError,
    ReturnDistributionFunction,
    SignedGridMeasure,
    SupportGrid,
    cdf,
    coalesce,
    dirac,
    mean,
    mix,
    pushforward_affine,
)
from .projection import hat_function, project, project_dirac, project_rdf, project_via_hats
from .metrics import (
    cramer_l2,
    kl_divergence,
    stochastically_dominates,
    sup_metric,
    wasserstein_p,
)
from .mdp import Mdp, Policy, Transition, greedy_policy, make_rng, sample_transition, validate
from .bellman import (
    bellman_control,
    bellman_eval,
    fixed_point,
    noise_expectation,
    projected_bellman_eval,
    sandwich_sequences,
    stochastic_target,
    true_return_oracle,
)
from .learning import (
    StepSchedule,
    kl_update_step,
    mixture_update_step,
    run_policy_evaluation,
    run_q_learning,
)

__all__ = [
    "__version__",
    "CategoricalDistribution",
    "FiniteDistribution",
    "ParameterError",
    "ReturnDistributionFunction",
    "SignedGridMeasure",
    "SupportGrid",
    "cdf",
    "coalesce",
    "dirac",
    "mean",
    "mix",
    "pushforward_affine",
    "hat_function",
    "project",
    "project_dirac",
    "project_rdf",
    "project_via_hats",
    "cramer_l2",
    "kl_divergence",
    "stochastically_dominates",
    "sup_metric",
    "wasserstein_p",
    "Mdp",
    "Policy",
    "Transition",
    "greedy_policy",
    "make_rng",
    "sample_transition",
    "validate",
    "bellman_control",
    "bellman_eval",
    "fixed_point",
    "noise_expectation",
    "projected_bellman_eval",
    "sandwich_sequences",
    "stochastic_target",
    "true_return_oracle",
    "StepSchedule",
    "kl_update_step",
    "mixture_update_step",
    "run_policy_evaluation",
    "run_q_learning",
]
