"""Experiment configuration, runners and reports."""
from .config import KINDS, ConfigError, ExperimentConfig
from .report import ExperimentReport, Verdict
from .runners import (compute_selection, run, run_barrier, run_convergence, run_counterexample,
                      run_critical, run_limit, run_mather, run_shifted, run_solve,
                      run_uniqueness_probe)

__all__ = ["KINDS", "ConfigError", "ExperimentConfig", "ExperimentReport", "Verdict",
           "compute_selection", "run", "run_barrier", "run_convergence", "run_counterexample",
           "run_critical", "run_limit", "run_mather", "run_shifted", "run_solve",
           "run_uniqueness_probe"]
