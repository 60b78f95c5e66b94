"""Synthetic agents with exponential learning curves, for metric ground truth.

Each task variant has a skill level that

* rises toward ``saturation`` during its own learning experiences:
  ``s <- sat - (sat - s) * exp(-1 / time_constant)``;
* decays toward ``initial_perf`` during learning experiences on other tasks:
  ``s <- p0 + (s - p0) * (1 - forgetting_rate)``;
* jumps once by ``fraction * (sat - s)`` when a source task with a positive
  transfer entry finishes its first learning block, provided the target has
  not been trained yet.

Evaluation experiences report the skill plus Gaussian noise and change nothing.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .core import BlockType, ExperienceRecord, LLError, STECurve, TaskId
from .scenario import BlockSchedule

DEFAULT_MEASURE = "performance"


@dataclass(frozen=True)
class TaskParams:
    initial_perf: float
    saturation: float
    time_constant: float
    forgetting_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.saturation < self.initial_perf:
            raise LLError("E_BAD_PARAMS", "saturation must be >= initial_perf")
        if not self.time_constant > 0:
            raise LLError("E_BAD_PARAMS", "time_constant must be positive")
        if not 0.0 <= self.forgetting_rate <= 1.0:
            raise LLError("E_BAD_PARAMS", "forgetting_rate must lie in [0, 1]")


@dataclass(frozen=True)
class SyntheticAgentParams:
    tasks: Mapping[TaskId, TaskParams]
    transfer: Mapping[tuple[TaskId, TaskId], float] = field(default_factory=dict)
    noise_sd: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.noise_sd < 0:
            raise LLError("E_BAD_PARAMS", "noise_sd must be non-negative")
        for (src, dst), frac in self.transfer.items():
            if not 0.0 <= frac <= 1.0:
                raise LLError("E_BAD_PARAMS", f"transfer {src}->{dst} must lie in [0, 1]")

    def params_for(self, task: TaskId) -> TaskParams:
        try:
            return self.tasks[task]
        except KeyError:
            raise LLError("E_UNKNOWN_TASK", f"no agent parameters for task {task}") from None

    def with_noise(self, noise_sd: float, seed: int | None = None) -> "SyntheticAgentParams":
        return SyntheticAgentParams(self.tasks, self.transfer, noise_sd, self.seed if seed is None else seed)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], task_variants: Sequence[TaskId]) -> "SyntheticAgentParams":
        """Build from an ``[agent]`` config table.

        Top-level ``initial_perf``, ``saturation``, ``time_constant`` and
        ``forgetting_rate`` are defaults for every task variant; ``[[agent.task]]``
        entries override them and ``[[agent.transfer]]`` entries give
        ``source``/``target`` labels with a ``fraction``.
        """
        keys = ("initial_perf", "saturation", "time_constant", "forgetting_rate")
        defaults = {"initial_perf": 1.0, "saturation": 10.0, "time_constant": 50.0, "forgetting_rate": 0.0}
        defaults.update({k: data[k] for k in keys if k in data})
        overrides: dict[TaskId, dict[str, Any]] = {}
        for entry in data.get("task", ()):
            if "name" not in entry:
                raise LLError("E_BAD_PARAMS", "agent.task entries need a 'name'")
            tid = TaskId(entry["name"], entry.get("variant"))
            overrides[tid] = {k: entry[k] for k in keys if k in entry}
        tasks = {}
        for tid in task_variants:
            merged = dict(defaults)
            merged.update(overrides.get(TaskId(tid.task_name), {}))
            merged.update(overrides.get(tid, {}))
            tasks[tid] = TaskParams(**{k: float(v) for k, v in merged.items()})
        transfer = {}
        for entry in data.get("transfer", ()):
            src, dst = TaskId.parse(entry["source"]), TaskId.parse(entry["target"])
            for t in (src, dst):
                if t not in tasks:
                    raise LLError("E_UNKNOWN_TASK", f"transfer references unknown task {t}")
            transfer[(src, dst)] = float(entry["fraction"])
        seed = data.get("seed", 0)
        return cls(tasks, transfer, float(data.get("noise_sd", 0.0)), int(seed, 0) if isinstance(seed, str) else seed)


class _Agent:
    def __init__(self, params: SyntheticAgentParams, tasks: Sequence[TaskId]):
        self.params = params
        self.p = {t: params.params_for(t) for t in tasks}
        self.skill = {t: p.initial_perf for t, p in self.p.items()}
        self.learn_factor = {t: math.exp(-1.0 / p.time_constant) for t, p in self.p.items()}
        self.trained: set[TaskId] = set()
        self.learned: set[TaskId] = set()
        self.applied: set[tuple[TaskId, TaskId]] = set()

    def learn_step(self, task: TaskId) -> float:
        p = self.p[task]
        self.skill[task] = p.saturation - (p.saturation - self.skill[task]) * self.learn_factor[task]
        for other, q in self.p.items():
            if other != task and q.forgetting_rate > 0:
                self.skill[other] = q.initial_perf + (self.skill[other] - q.initial_perf) * (1.0 - q.forgetting_rate)
        return self.skill[task]

    def finish_learning_block(self, task: TaskId) -> None:
        if task in self.learned:
            return
        self.learned.add(task)
        for (src, dst), frac in sorted(self.params.transfer.items(), key=lambda kv: (kv[0][0].sort_key(), kv[0][1].sort_key())):
            if src != task or frac <= 0 or dst in self.trained or dst not in self.p or (src, dst) in self.applied:
                continue
            self.applied.add((src, dst))
            self.skill[dst] += frac * (self.p[dst].saturation - self.skill[dst])


def simulate_lifetime(
    params: SyntheticAgentParams,
    schedule: BlockSchedule,
    run_id: str = "run",
    measure: str = DEFAULT_MEASURE,
) -> list[ExperienceRecord]:
    """Run the synthetic agent through ``schedule`` and return its log."""
    tasks = sorted({t for b in schedule.blocks for t in b.tasks}, key=TaskId.sort_key)
    agent = _Agent(params, tasks)
    noise = random.Random(params.seed)
    sd = params.noise_sd
    records = []
    exp = 0
    for block_num, block in enumerate(schedule.blocks):
        if block.block_type is BlockType.LEARNING:
            task = block.tasks[0]
            agent.trained.add(task)
            for _ in range(block.length):
                value = agent.learn_step(task) + (noise.gauss(0.0, sd) if sd else 0.0)
                records.append(ExperienceRecord(run_id, exp, block_num, block.block_type, task, {measure: value}))
                exp += 1
            agent.finish_learning_block(task)
        else:
            for task in block.tasks:
                for _ in range(block.length):
                    value = agent.skill[task] + (noise.gauss(0.0, sd) if sd else 0.0)
                    records.append(ExperienceRecord(run_id, exp, block_num, block.block_type, task, {measure: value}))
                    exp += 1
    return records


def simulate_ste_records(
    params: SyntheticAgentParams,
    task: TaskId,
    num_lx: int,
    run_id: str | None = None,
    block_lengths: Sequence[int] | None = None,
    measure: str = DEFAULT_MEASURE,
) -> list[ExperienceRecord]:
    """A single-task expert log: ``num_lx`` learning experiences on ``task`` only.

    ``block_lengths`` splits the experiences into consecutive learning blocks,
    matching the block structure of the lifetimes it is compared against.
    """
    agent = _Agent(params, [task])
    lengths = list(block_lengths) if block_lengths else [num_lx]
    if sum(lengths) != num_lx or any(n < 1 for n in lengths):
        raise LLError("E_BAD_PARAMS", "block_lengths must be positive and sum to num_lx")
    noise = random.Random(params.seed)
    sd = params.noise_sd
    run_id = run_id or f"ste-{task.label}"
    records = []
    exp = 0
    for block_num, length in enumerate(lengths):
        for _ in range(length):
            value = agent.learn_step(task) + (noise.gauss(0.0, sd) if sd else 0.0)
            records.append(ExperienceRecord(run_id, exp, block_num, BlockType.LEARNING, task, {measure: value}))
            exp += 1
    return records


def simulate_ste(
    params: SyntheticAgentParams, task: TaskId, num_lx: int, measure: str = DEFAULT_MEASURE
) -> STECurve:
    """Raw (unpreprocessed) single-task expert curve."""
    records = simulate_ste_records(params, task, num_lx, measure=measure)
    return STECurve(task, measure, tuple(r.measures[measure] for r in records), (records[0].run_id,))
