"""Config-driven verification experiments with machine-readable reports."""

from .config import ExperimentConfig, load_config
from .generators import bandit_mdp, chain_mdp, generate_random_mdp, three_state_mdp
from .registry import REGISTRY
from .report import ExperimentReport, Verdict, emit_report, load_report
from .runner import resolved_config, run_experiment

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "REGISTRY",
    "Verdict",
    "bandit_mdp",
    "chain_mdp",
    "emit_report",
    "generate_random_mdp",
    "load_config",
    "load_report",
    "resolved_config",
    "run_experiment",
    "three_state_mdp",
]
