"""Smoothing, range shifting, and reduction of lifetimes to block summaries."""

from __future__ import annotations

import logging
import math
import statistics
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .core import (
    BlockSummaries,
    BlockType,
    Lifetime,
    LLError,
    PreprocessManifest,
    STECurve,
    TaskId,
)
from .ingest import STERun

log = logging.getLogger(__name__)

SUMMARIZERS = ("mean", "median")


@dataclass(frozen=True)
class PreprocessConfig:
    smoothing_window: int = 9
    eval_summarizer: str = "mean"
    range_shift: bool = True
    shift_epsilon: float = 0.001

    def __post_init__(self) -> None:
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise LLError("E_BAD_WINDOW", f"smoothing_window must be odd and >= 1, got {self.smoothing_window}")
        if self.eval_summarizer not in SUMMARIZERS:
            raise LLError("E_BAD_CONFIG", f"eval_summarizer must be one of {SUMMARIZERS}")
        if not self.shift_epsilon > 0:
            raise LLError("E_BAD_CONFIG", "shift_epsilon must be positive")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "PreprocessConfig":
        known = {"smoothing_window", "eval_summarizer", "range_shift", "shift_epsilon"}
        unknown = set(data) - known
        if unknown:
            raise LLError("E_BAD_CONFIG", f"unknown preprocess keys: {sorted(unknown)}")
        return cls(**dict(data))


def smooth_series(values: Sequence[float], window: int) -> list[float]:
    """Centered moving average; the window shrinks at both ends instead of padding."""
    if not values:
        raise LLError("E_EMPTY_SERIES", "cannot smooth an empty series")
    if window < 1 or window % 2 == 0:
        raise LLError("E_BAD_WINDOW", f"window must be odd and >= 1, got {window}")
    if window == 1:
        return [float(v) for v in values]
    half = window // 2
    n = len(values)
    if window <= 63:
        return [
            math.fsum(values[max(0, i - half) : min(n, i + half + 1)]) / (min(n, i + half + 1) - max(0, i - half))
            for i in range(n)
        ]
    # wide windows: prefix sums keep this O(n)
    prefix = [0.0]
    for v in values:
        prefix.append(prefix[-1] + v)
    out = []
    for i in range(n):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        out.append((prefix[hi] - prefix[lo]) / (hi - lo))
    return out


def effective_window(window: int, length: int) -> int:
    """Clip an odd window to the largest odd number not exceeding ``length``."""
    if length <= 0:
        return 1
    cap = length if length % 2 else length - 1
    return max(1, min(window, cap))


def smooth_clipped(values: Sequence[float], window: int) -> list[float]:
    return smooth_series(values, effective_window(window, len(values)))


def shift_offset(series: Sequence[Sequence[float]], epsilon: float = 0.001) -> float:
    flat = [v for s in series for v in s]
    if not flat:
        return 0.0
    lo, hi = min(flat), max(flat)
    if lo > 0:
        return 0.0
    return -lo + epsilon * max(1.0, hi - lo)


def shift_range(
    *series: Sequence[float], epsilon: float = 0.001
) -> tuple[list[list[float]], float]:
    """Shift all series by one common offset so every value is strictly positive.

    The offset is zero when every value is already positive; otherwise it is
    ``-min + epsilon * max(1, max - min)`` over all series jointly.
    """
    offset = shift_offset(series, epsilon)
    return [[v + offset for v in s] for s in series], offset


def _summarize(values: Sequence[float], how: str) -> float:
    if how == "median":
        return float(statistics.median(values))
    return math.fsum(values) / len(values)


def _task_values(lifetime: Lifetime, task: TaskId, measure: str) -> list[float]:
    return [
        rec.measures[measure]
        for rec in lifetime.records()
        if rec.task == task and measure in rec.measures
    ]


def compute_offsets(
    lifetime: Lifetime,
    measure: str,
    config: PreprocessConfig,
    ste_runs: Mapping[TaskId, Sequence[STERun]] | None = None,
) -> dict[TaskId, float]:
    """Per-task range-shift offsets, joint over the lifetime and that task's STE data."""
    offsets = {}
    for task in lifetime.sorted_tasks():
        series = [_task_values(lifetime, task, measure)]
        for run in (ste_runs or {}).get(task, ()):
            series.extend(run.values(measure))
        offsets[task] = shift_offset(series, config.shift_epsilon) if config.range_shift else 0.0
    return offsets


def summarize_blocks(
    lifetime: Lifetime,
    measure_name: str,
    config: PreprocessConfig | None = None,
    offsets: Mapping[TaskId, float] | None = None,
) -> BlockSummaries:
    """Reduce a lifetime to P_E(n, t) scalars and smoothed P_L(n, t(n)) series.

    Offsets default to ones computed from the lifetime alone; pass offsets from
    :func:`compute_offsets` to shift jointly with STE data.
    """
    config = config or PreprocessConfig()
    if not any(measure_name in rec.measures for rec in lifetime.records()):
        raise LLError("E_MEASURE_ABSENT", f"measure {measure_name!r} appears in no record of run {lifetime.run_id!r}")
    if offsets is None:
        offsets = compute_offsets(lifetime, measure_name, config)

    missing = sum(1 for rec in lifetime.records() if measure_name not in rec.measures)
    if missing:
        log.warning("run %s: %d records lack measure %r and were skipped", lifetime.run_id, missing, measure_name)

    evals: dict[tuple[int, TaskId], float] = {}
    for n in range(lifetime.num_learning_blocks + 1):
        block = lifetime.eval_block_after(n)
        if block is None:
            continue
        for task in block.tasks:
            values = block.values(task, measure_name)
            if values:
                off = offsets.get(task, 0.0)
                evals[(n, task)] = _summarize([v + off for v in values], config.eval_summarizer)

    learn: dict[int, tuple[float, ...]] = {}
    for info in lifetime.learning_blocks:
        block = lifetime.blocks[info.block_index]
        assert block.block_type is BlockType.LEARNING
        values = block.values(info.task, measure_name)
        if not values:
            log.warning("run %s: learning block %d has no %r values", lifetime.run_id, info.ordinal, measure_name)
            learn[info.ordinal] = ()
            continue
        off = offsets.get(info.task, 0.0)
        learn[info.ordinal] = tuple(smooth_clipped([v + off for v in values], config.smoothing_window))

    manifest = PreprocessManifest(
        smoothing_window=config.smoothing_window,
        eval_summarizer=config.eval_summarizer,
        range_shift=config.range_shift,
        shift_epsilon=config.shift_epsilon,
        offsets=dict(offsets),
    )
    return BlockSummaries(
        measure_name=measure_name,
        task_set=lifetime.task_set,
        block_tasks=tuple(info.task for info in lifetime.learning_blocks),
        eval=evals,
        learn=learn,
        manifest=manifest,
    )


def summarize_ste(
    runs: Sequence[STERun],
    measure_name: str,
    config: PreprocessConfig | None = None,
    offset: float = 0.0,
) -> STECurve:
    """Shift and smooth each STE block, concatenate, and average across runs.

    With several STE runs for one task the curves are averaged per experience,
    truncated to the shortest run.
    """
    config = config or PreprocessConfig()
    if not runs:
        raise LLError("E_NO_STE", "no STE runs supplied")
    curves = []
    for run in runs:
        curve: list[float] = []
        for values in run.values(measure_name):
            if values:
                curve.extend(smooth_clipped([v + offset for v in values], config.smoothing_window))
        if curve:
            curves.append(curve)
    if not curves:
        raise LLError("E_MEASURE_ABSENT", f"measure {measure_name!r} absent from STE runs for {runs[0].task}")
    length = min(len(c) for c in curves)
    if len(curves) == 1:
        series = curves[0]
    else:
        series = [math.fsum(c[i] for c in curves) / len(curves) for i in range(length)]
    return STECurve(runs[0].task, measure_name, tuple(series), tuple(r.run_id for r in runs))


@dataclass
class Prepared:
    summaries: BlockSummaries
    ste: dict[TaskId, STECurve] = field(default_factory=dict)


def prepare(
    lifetime: Lifetime,
    measure_name: str,
    config: PreprocessConfig | None = None,
    ste_runs: Mapping[TaskId, Sequence[STERun]] | None = None,
) -> Prepared:
    """Summaries and STE curves sharing one per-task range shift."""
    config = config or PreprocessConfig()
    offsets = compute_offsets(lifetime, measure_name, config, ste_runs)
    summaries = summarize_blocks(lifetime, measure_name, config, offsets)
    curves = {}
    for task, runs in (ste_runs or {}).items():
        if task not in lifetime.task_set or not runs:
            continue
        try:
            curves[task] = summarize_ste(runs, measure_name, config, offsets.get(task, 0.0))
        except LLError as exc:
            log.warning("run %s: STE for %s unusable: %s", lifetime.run_id, task, exc)
    return Prepared(summaries, curves)
