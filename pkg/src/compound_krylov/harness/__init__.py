"""Experiment pipeline and ``ck`` command line interface."""

from .config import ConfigError, ExperimentConfig, load_config
from .experiments import (
    ErrorReport,
    ProblemInstance,
    dump_singular_values,
    error_vs_order,
    evaluate_basis,
    make_problem,
    run_offline,
    run_online_eval,
    sample_sigmas,
)
