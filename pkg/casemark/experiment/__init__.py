"""Configuration, orchestration of agent pairs, figures and reports"""
from .config import (
    DEFAULT_PRESET,
    ExperimentConfig,
    build_config,
    config_hash,
    config_to_dict,
    default_config,
    load_config,
    validate,
)
from .runner import (
    PairStatus,
    RunManifest,
    aggregate_outputs,
    build_pair_data,
    generate_corpora,
    make_agents,
    pair_artifacts,
    reevaluate,
    run_experiment,
    run_pair,
)
from .plots import plot_accuracy, plot_preferences
from .report import Report, build_report, format_report, slope_table, write_report

__all__ = [
    "DEFAULT_PRESET",
    "ExperimentConfig",
    "build_config",
    "config_hash",
    "config_to_dict",
    "default_config",
    "load_config",
    "validate",
    "PairStatus",
    "RunManifest",
    "aggregate_outputs",
    "build_pair_data",
    "generate_corpora",
    "make_agents",
    "pair_artifacts",
    "reevaluate",
    "run_experiment",
    "run_pair",
    "plot_accuracy",
    "plot_preferences",
    "Report",
    "build_report",
    "format_report",
    "slope_table",
    "write_report",
]
