"""Domain types shared across the package: task ids, experience records, blocks and lifetimes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator, Mapping, Sequence


class LLError(Exception):
    """Base error carrying a stable machine-readable code."""

    def __init__(self, code: str, message: str = "", line: int | None = None):
        self.code = code
        self.message = message
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{code}{where}: {message}" if message else f"{code}{where}")


class BlockType(str, Enum):
    LEARNING = "learning"
    EVALUATION = "evaluation"


@dataclass(frozen=True, order=True)
class TaskId:
    """A task, or one variant of a task. Variants count as separate tasks for metrics."""

    task_name: str
    variant_name: str | None = None

    def __post_init__(self) -> None:
        if not self.task_name:
            raise ValueError("task_name must be non-empty")

    @property
    def label(self) -> str:
        if self.variant_name is None:
            return self.task_name
        return f"{self.task_name}/{self.variant_name}"

    @classmethod
    def parse(cls, label: str) -> "TaskId":
        name, sep, variant = label.partition("/")
        return cls(name, variant if sep else None)

    def sort_key(self) -> tuple[str, str]:
        return (self.task_name, self.variant_name or "")

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class ExperienceRecord:
    run_id: str
    exp_num: int
    block_num: int
    block_type: BlockType
    task: TaskId
    measures: Mapping[str, float]
    timestamp: str | None = None
    worker_id: str | None = None
    extras: Mapping[str, Any] = field(default_factory=dict)
    # 1-based source line, when the record came from a file
    line: int | None = field(default=None, compare=False)

    @property
    def is_learning(self) -> bool:
        return self.block_type is BlockType.LEARNING


@dataclass(frozen=True)
class Block:
    block_num: int
    block_type: BlockType
    records: tuple[ExperienceRecord, ...]

    @property
    def tasks(self) -> tuple[TaskId, ...]:
        seen: dict[TaskId, None] = {}
        for rec in self.records:
            seen.setdefault(rec.task, None)
        return tuple(seen)

    @property
    def task(self) -> TaskId:
        """The single task of a learning block."""
        return self.records[0].task

    def series(self) -> list[tuple[TaskId, list[Mapping[str, float]]]]:
        """Per-task measure maps in experience order."""
        out: dict[TaskId, list[Mapping[str, float]]] = {}
        for rec in self.records:
            out.setdefault(rec.task, []).append(rec.measures)
        return list(out.items())

    def values(self, task: TaskId, measure: str) -> list[float]:
        return [
            rec.measures[measure]
            for rec in self.records
            if rec.task == task and measure in rec.measures
        ]

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class LearningBlockInfo:
    ordinal: int  # n, 1-based
    task: TaskId
    length: int
    block_index: int  # position in Lifetime.blocks


@dataclass(frozen=True)
class Lifetime:
    run_id: str
    blocks: tuple[Block, ...]
    task_set: frozenset[TaskId]
    learning_blocks: tuple[LearningBlockInfo, ...]

    @property
    def num_learning_blocks(self) -> int:
        return len(self.learning_blocks)

    @property
    def has_initial_eval(self) -> bool:
        return bool(self.blocks) and self.blocks[0].block_type is BlockType.EVALUATION

    def block_task(self, n: int) -> TaskId:
        """t(n) for learning block ordinal n."""
        return self.learning_blocks[n - 1].task

    def eval_block_after(self, n: int) -> Block | None:
        """The evaluation block following learning block n (n=0: the initial EB)."""
        if n == 0:
            return self.blocks[0] if self.has_initial_eval else None
        idx = self.learning_blocks[n - 1].block_index + 1
        if idx < len(self.blocks) and self.blocks[idx].block_type is BlockType.EVALUATION:
            return self.blocks[idx]
        return None

    def records(self) -> Iterator[ExperienceRecord]:
        for block in self.blocks:
            yield from block.records

    def sorted_tasks(self) -> list[TaskId]:
        return sorted(self.task_set, key=TaskId.sort_key)


def task_set_of(lifetime: Lifetime) -> frozenset[TaskId]:
    """Union of all tasks appearing in any block of the lifetime."""
    return frozenset(task for block in lifetime.blocks for task in block.tasks)


@dataclass(frozen=True)
class PreprocessManifest:
    smoothing_window: int
    eval_summarizer: str
    range_shift: bool
    shift_epsilon: float
    offsets: Mapping[TaskId, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "smoothing_window": self.smoothing_window,
            "eval_summarizer": self.eval_summarizer,
            "range_shift": self.range_shift,
            "shift_epsilon": self.shift_epsilon,
            "offsets": {t.label: v for t, v in sorted(self.offsets.items(), key=lambda kv: kv[0].sort_key())},
        }


@dataclass(frozen=True)
class BlockSummaries:
    """P_E(n, t) scalars and P_L(n, t(n)) series after preprocessing.

    ``block_tasks[n - 1]`` is t(n); ``eval[(n, t)]`` exists only when the
    evaluation block after learning block n contained task t.
    """

    measure_name: str
    task_set: frozenset[TaskId]
    block_tasks: tuple[TaskId, ...]
    eval: Mapping[tuple[int, TaskId], float]
    learn: Mapping[int, tuple[float, ...]]
    manifest: PreprocessManifest | None = None

    @property
    def num_learning_blocks(self) -> int:
        return len(self.block_tasks)

    def sorted_tasks(self) -> list[TaskId]:
        return sorted(self.task_set, key=TaskId.sort_key)

    def stitched(self, task: TaskId) -> list[float]:
        """All learning values for ``task`` concatenated in block order."""
        out: list[float] = []
        for n, t in enumerate(self.block_tasks, start=1):
            if t == task:
                out.extend(self.learn.get(n, ()))
        return out


@dataclass(frozen=True)
class STECurve:
    task: TaskId
    measure_name: str
    series: tuple[float, ...]
    source_run_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.series:
            raise LLError("E_EMPTY_SERIES", f"STE curve for {self.task} is empty")
        if not all(math.isfinite(v) for v in self.series):
            raise LLError("E_NONFINITE", f"STE curve for {self.task} has non-finite values")


def sequence_mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)
