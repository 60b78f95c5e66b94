"""Lifelong-learning metrics: ingestion, preprocessing, metrics, statistics, scenarios and a synthetic agent."""

from __future__ import annotations

from .core import (
    Block,
    BlockSummaries,
    BlockType,
    ExperienceRecord,
    Lifetime,
    LLError,
    STECurve,
    TaskId,
)
from .ingest import assemble_lifetime, parse_log, read_log, serialize, validate_run, write_log
from .metrics import (
    MetricOptions,
    MetricResult,
    TransferMode,
    backward_transfer,
    compute_all,
    contrast,
    evaluate_thresholds,
    forward_transfer,
    performance_maintenance,
    performance_recovery,
    ratio,
    relative_performance,
    sample_efficiency,
)
from .preprocess import PreprocessConfig, prepare, shift_range, smooth_series, summarize_blocks
from .scenario import ScenarioSpec, TaskSpec, build_protocol, generate
from .simulate import SyntheticAgentParams, TaskParams, simulate_lifetime, simulate_ste
from .stats import (
    aggregate_runs,
    binarized_threshold_test,
    cost_overhead,
    one_tailed_t_test,
    required_sample_size,
    spearman_correlation,
)

__version__ = "0.1.0"

__all__ = [
    "Block", "BlockSummaries", "BlockType", "ExperienceRecord", "Lifetime", "LLError", "STECurve", "TaskId",
    "assemble_lifetime", "parse_log", "read_log", "serialize", "validate_run", "write_log",
    "MetricOptions", "MetricResult", "TransferMode", "backward_transfer", "compute_all", "contrast",
    "evaluate_thresholds", "forward_transfer", "performance_maintenance", "performance_recovery", "ratio",
    "relative_performance", "sample_efficiency",
    "PreprocessConfig", "prepare", "shift_range", "smooth_series", "summarize_blocks",
    "ScenarioSpec", "TaskSpec", "build_protocol", "generate",
    "SyntheticAgentParams", "TaskParams", "simulate_lifetime", "simulate_ste",
    "aggregate_runs", "binarized_threshold_test", "cost_overhead", "one_tailed_t_test",
    "required_sample_size", "spearman_correlation",
]
