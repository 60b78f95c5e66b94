"""The lifelong-learning metrics: PM, FT, BT, RP, SE and the experimental PR.

All functions take :class:`~llmetrics.core.BlockSummaries` (already smoothed and
range-shifted) and return a :class:`MetricResult`. Terms whose inputs are
missing never fail the computation; they are listed in ``skipped_units``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .core import BlockSummaries, LLError, STECurve, TaskId
from .preprocess import smooth_clipped


class MetricError(LLError):
    pass


class TransferMode(str, Enum):
    RATIO = "ratio"
    CONTRAST = "contrast"


METRIC_NAMES = ("PM", "FT", "BT", "RP", "SE", "PR")


@dataclass(frozen=True)
class MetricResult:
    metric_name: str
    per_unit: tuple[tuple[str, float], ...] = ()
    skipped_units: tuple[tuple[str, str], ...] = ()
    mode: TransferMode | None = None
    measure_name: str | None = None

    def __post_init__(self) -> None:
        labels = [u for u, _ in self.per_unit]
        if len(set(labels)) != len(labels):
            raise MetricError("E_DUPLICATE_UNIT", f"{self.metric_name} has duplicate unit labels")

    @property
    def aggregate(self) -> float | None:
        if not self.per_unit:
            return None
        return math.fsum(v for _, v in self.per_unit) / len(self.per_unit)

    @property
    def values(self) -> list[float]:
        return [v for _, v in self.per_unit]

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric_name,
            "mode": self.mode.value if self.mode else None,
            "measure": self.measure_name,
            "per_unit": [{"unit": u, "value": v} for u, v in self.per_unit],
            "aggregate": self.aggregate,
            "skipped": [{"unit": u, "reason": r} for u, r in self.skipped_units],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MetricResult":
        mode = data.get("mode")
        return cls(
            metric_name=data["metric"],
            per_unit=tuple((d["unit"], float(d["value"])) for d in data.get("per_unit", ())),
            skipped_units=tuple((d["unit"], d["reason"]) for d in data.get("skipped", ())),
            mode=TransferMode(mode) if mode else None,
            measure_name=data.get("measure"),
        )


def contrast(a: float, b: float) -> float:
    """(a - b) / (a + b); defined when b == 0, unlike the ratio."""
    if a + b == 0:
        raise MetricError("E_DEGENERATE", "contrast undefined when a + b == 0")
    return (a - b) / (a + b)


def ratio(a: float, b: float) -> float:
    if b == 0:
        raise MetricError("E_ZERO_DENOM", "ratio undefined when b == 0")
    return a / b


def compare(after: float, before: float, mode: TransferMode) -> float:
    if mode is TransferMode.CONTRAST:
        if after < 0 or before < 0:
            raise MetricError("E_NEGATIVE", "contrast requires non-negative operands")
        return contrast(after, before)
    if before <= 0:
        raise MetricError("E_ZERO_DENOM", "ratio requires a positive denominator")
    return ratio(after, before)


def _eval_pair(
    summaries: BlockSummaries, n_after: int, n_before: int, task: TaskId, mode: TransferMode
) -> tuple[float | None, str | None]:
    after = summaries.eval.get((n_after, task))
    before = summaries.eval.get((n_before, task))
    missing = [f"P_E({n},{task})" for n, v in ((n_before, before), (n_after, after)) if v is None]
    if missing:
        return None, "missing " + ", ".join(missing)
    try:
        return compare(after, before, mode), None
    except MetricError as exc:
        return None, exc.code


def forward_transfer(
    summaries: BlockSummaries,
    mode: TransferMode = TransferMode.RATIO,
    first_pair_only: bool = False,
) -> MetricResult:
    """Jumpstart transfer for every first-time ordered pair (learned task -> unlearned task).

    With ``first_pair_only`` only the pair formed by the first two distinct
    learned tasks is kept.
    """
    mode = TransferMode(mode)
    learned: set[TaskId] = set()
    seen_pairs: set[tuple[TaskId, TaskId]] = set()
    per_unit, skipped = [], []
    keep = None
    if first_pair_only:
        order = list(dict.fromkeys(summaries.block_tasks))
        keep = (order[0], order[1]) if len(order) >= 2 else ()
    for n, tn in enumerate(summaries.block_tasks, start=1):
        if tn in learned:
            continue
        learned.add(tn)
        for t in sorted(summaries.task_set - learned, key=TaskId.sort_key):
            if (tn, t) in seen_pairs:
                continue
            seen_pairs.add((tn, t))
            if keep is not None and (tn, t) != keep:
                continue
            label = f"{tn.label}->{t.label}"
            value, reason = _eval_pair(summaries, n, n - 1, t, mode)
            if value is None:
                skipped.append((label, reason))
            else:
                per_unit.append((label, value))
    return MetricResult("FT", tuple(per_unit), tuple(skipped), mode, summaries.measure_name)


def backward_transfer(
    summaries: BlockSummaries,
    mode: TransferMode = TransferMode.RATIO,
    every_block: bool = False,
) -> MetricResult:
    """Effect of learning t(n) on each previously learned task, first unordered pair only.

    ``every_block`` instead emits a value for every learned task after every
    learning block from the second on.
    """
    mode = TransferMode(mode)
    tasks = summaries.block_tasks
    learned: set[TaskId] = {tasks[0]} if tasks else set()
    seen_pairs: set[frozenset[TaskId]] = set()
    per_unit, skipped = [], []
    for n in range(2, len(tasks) + 1):
        tn = tasks[n - 1]
        learned.add(tn)
        for t in sorted(summaries.task_set - {tn}, key=TaskId.sort_key):
            if t not in learned:
                continue
            pair = frozenset((tn, t))
            if every_block:
                label = f"{tn.label}->{t.label}@{n}"
            elif pair in seen_pairs:
                continue
            else:
                label = f"{tn.label}->{t.label}"
            seen_pairs.add(pair)
            value, reason = _eval_pair(summaries, n, n - 1, t, mode)
            if value is None:
                skipped.append((label, reason))
            else:
                per_unit.append((label, value))
    return MetricResult("BT", tuple(per_unit), tuple(skipped), mode, summaries.measure_name)


def performance_maintenance(summaries: BlockSummaries) -> MetricResult:
    """Mean change of each task's evaluation score relative to just after its latest learning block."""
    most_recent: dict[TaskId, int] = {}
    maintenance: dict[TaskId, list[float]] = {}
    skipped = []
    for n, tn in enumerate(summaries.block_tasks, start=1):
        most_recent[tn] = n
        for t in sorted(summaries.task_set, key=TaskId.sort_key):
            mrb = most_recent.get(t)
            if mrb is None or t == tn:
                continue
            now = summaries.eval.get((n, t))
            ref = summaries.eval.get((mrb, t))
            if now is None or ref is None:
                skipped.append((f"{t.label}@{n}", f"missing P_E({n if now is None else mrb},{t})"))
                continue
            maintenance.setdefault(t, []).append(now - ref)
    per_unit = []
    for t in sorted(summaries.task_set, key=TaskId.sort_key):
        values = maintenance.get(t)
        if values:
            per_unit.append((t.label, math.fsum(values) / len(values)))
        else:
            skipped.append((t.label, "no maintenance values"))
    return MetricResult("PM", tuple(per_unit), tuple(skipped), None, summaries.measure_name)


def _learned_tasks(summaries: BlockSummaries) -> list[TaskId]:
    return sorted(set(summaries.block_tasks), key=TaskId.sort_key)


def _ll_and_ste(
    summaries: BlockSummaries, task: TaskId, ste: Mapping[TaskId, STECurve]
) -> tuple[list[float] | None, list[float] | None, str | None]:
    ll = summaries.stitched(task)
    if not ll:
        return None, None, "E_EMPTY_SERIES"
    curve = ste.get(task)
    if curve is None:
        return None, None, "E_NO_STE"
    if len(curve.series) < len(ll):
        return None, None, f"E_STE_SHORT: STE has {len(curve.series)} experiences, lifetime has {len(ll)}"
    return ll, list(curve.series[: len(ll)]), None


def relative_performance(summaries: BlockSummaries, ste: Mapping[TaskId, STECurve]) -> MetricResult:
    """Area under the stitched learning curve relative to the STE's, over equal experience counts."""
    per_unit, skipped = [], []
    for task in _learned_tasks(summaries):
        ll, expert, reason = _ll_and_ste(summaries, task, ste)
        if reason:
            skipped.append((task.label, reason))
            continue
        denom = math.fsum(expert)
        if denom <= 0:
            skipped.append((task.label, "E_ZERO_DENOM"))
            continue
        per_unit.append((task.label, math.fsum(ll) / denom))
    return MetricResult("RP", tuple(per_unit), tuple(skipped), None, summaries.measure_name)


def saturation(series: Sequence[float]) -> tuple[float, int]:
    """(max value, 1-based index of its first occurrence)."""
    best, at = series[0], 0
    for i, v in enumerate(series):
        if v > best:
            best, at = v, i
    return best, at + 1


def sample_efficiency(
    summaries: BlockSummaries, ste: Mapping[TaskId, STECurve], window: int = 9
) -> MetricResult:
    """Saturation value ratio times inverse ratio of experiences-to-saturation, LL vs STE."""
    per_unit, skipped = [], []
    for task in _learned_tasks(summaries):
        ll, expert, reason = _ll_and_ste(summaries, task, ste)
        if reason:
            skipped.append((task.label, reason))
            continue
        val_ll, exp_ll = saturation(smooth_clipped(ll, window))
        val_ste, exp_ste = saturation(smooth_clipped(expert, window))
        if val_ste <= 0:
            skipped.append((task.label, "E_ZERO_DENOM"))
            continue
        per_unit.append((task.label, (val_ll / val_ste) * (exp_ste / exp_ll)))
    return MetricResult("SE", tuple(per_unit), tuple(skipped), None, summaries.measure_name)


def ols_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    mx, my = math.fsum(xs) / n, math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise MetricError("E_DEGENERATE", "slope undefined for a single x value")
    return math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx


@dataclass(frozen=True)
class RecoveryEvent:
    task: TaskId
    block: int
    ordinal: int
    recovery_time: int | None  # None when censored


def recovery_events(summaries: BlockSummaries, tolerance: float = 0.05) -> list[RecoveryEvent]:
    """Performance drops at repeated learning blocks and the experiences needed to recover."""
    events = []
    for task in _learned_tasks(summaries):
        blocks = [n for n, t in enumerate(summaries.block_tasks, start=1) if t == task and summaries.learn.get(n)]
        ordinal = 0
        for prev, cur in zip(blocks, blocks[1:]):
            target = summaries.learn[prev][-1]
            series = summaries.learn[cur]
            if not series[0] < (1 - tolerance) * target:
                continue
            ordinal += 1
            rt = next((i + 1 for i, v in enumerate(series) if v >= target), None)
            events.append(RecoveryEvent(task, cur, ordinal, rt))
    return events


def performance_recovery(summaries: BlockSummaries, tolerance: float = 0.05) -> MetricResult:
    """Slope of recovery time against drop ordinal, per task (experimental).

    A negative slope means the system bounces back faster as its lifetime
    progresses. Censored drops (never recovered within the block) are left out
    of the fit and reported as skipped.
    """
    events = recovery_events(summaries, tolerance)
    if sum(1 for e in events if e.recovery_time is not None) < 2:
        raise MetricError("E_INSUFFICIENT_EVENTS", "fewer than two uncensored recovery events")
    per_unit, skipped = [], []
    by_task: dict[TaskId, list[RecoveryEvent]] = {}
    for e in events:
        if e.recovery_time is None:
            skipped.append((f"{e.task.label}@{e.block}", "censored: never re-attained prior value"))
        else:
            by_task.setdefault(e.task, []).append(e)
    for task in _learned_tasks(summaries):
        evs = by_task.get(task, [])
        if len(evs) < 2:
            if evs:
                skipped.append((task.label, "fewer than two uncensored events"))
            continue
        slope = ols_slope([e.ordinal for e in evs], [e.recovery_time for e in evs])
        per_unit.append((task.label, slope))
    return MetricResult("PR", tuple(per_unit), tuple(skipped), None, summaries.measure_name)


# -- thresholds --------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdVerdict:
    metric_name: str
    threshold: float
    direction: str  # "greater" or "less"
    value: float
    demonstrates_ll: bool
    mode: TransferMode | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric_name,
            "mode": self.mode.value if self.mode else None,
            "threshold": self.threshold,
            "direction": self.direction,
            "value": self.value,
            "demonstrates_ll": self.demonstrates_ll,
        }


def ll_threshold(metric_name: str, mode: TransferMode | None = None) -> tuple[float, str]:
    """The LL threshold and the direction in which a value demonstrates LL."""
    if metric_name in ("FT", "BT"):
        return (0.0 if mode is TransferMode.CONTRAST else 1.0), "greater"
    if metric_name in ("RP", "SE"):
        return 1.0, "greater"
    if metric_name == "PM":
        return 0.0, "greater"
    if metric_name == "PR":
        return 0.0, "less"
    raise MetricError("E_UNKNOWN_METRIC", metric_name)


def demonstrates_ll(value: float, threshold: float, direction: str) -> bool:
    return value > threshold if direction == "greater" else value < threshold


def evaluate_thresholds(results: Iterable[MetricResult]) -> list[ThresholdVerdict]:
    verdicts = []
    for res in results:
        agg = res.aggregate
        if agg is None:
            continue
        threshold, direction = ll_threshold(res.metric_name, res.mode)
        verdicts.append(
            ThresholdVerdict(res.metric_name, threshold, direction, agg, demonstrates_ll(agg, threshold, direction), res.mode)
        )
    return verdicts


@dataclass(frozen=True)
class MetricOptions:
    mode: TransferMode = TransferMode.RATIO
    window: int = 9
    ft_first_pair_only: bool = False
    bt_every_block: bool = False
    recovery: bool = False
    recovery_tolerance: float = 0.05


@dataclass
class MetricReport:
    results: list[MetricResult] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)


def compute_all(
    summaries: BlockSummaries,
    ste: Mapping[TaskId, STECurve] | None = None,
    options: MetricOptions | None = None,
) -> MetricReport:
    """Every metric computable from the inputs, in a fixed order."""
    options = options or MetricOptions()
    report = MetricReport()
    report.results.append(performance_maintenance(summaries))
    report.results.append(forward_transfer(summaries, options.mode, options.ft_first_pair_only))
    report.results.append(backward_transfer(summaries, options.mode, options.bt_every_block))
    if not ste:
        report.notices.append("RP and SE absent: no STE data")
    report.results.append(relative_performance(summaries, ste or {}))
    report.results.append(sample_efficiency(summaries, ste or {}, options.window))
    if options.recovery:
        try:
            report.results.append(performance_recovery(summaries, options.recovery_tolerance))
        except MetricError as exc:
            report.notices.append(f"PR skipped: {exc.code}")
    return report
