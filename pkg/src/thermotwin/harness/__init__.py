"""Experiment matrices, reports and run directories."""

from .report import ControllerResult, ExperimentReport, ModelResult
from .runs import latest_run, make_run_dir, write_report, write_run
from .suite import (
    ControlAssets,
    Timing,
    build_controller,
    derive_seed,
    llm_variant,
    merge,
    prepare_assets,
    run_controller_suite,
    run_episode,
    run_model_suite,
    train_agent,
    train_model,
    training_windows,
)

__all__ = [
    "ControlAssets", "ControllerResult", "ExperimentReport", "ModelResult", "Timing", "build_controller",
    "derive_seed", "latest_run", "llm_variant", "make_run_dir", "merge", "prepare_assets", "run_controller_suite",
    "run_episode", "run_model_suite", "train_agent", "train_model", "training_windows", "write_report",
    "write_run",
]
