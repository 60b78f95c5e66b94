"""Scenario generation: condensed, dispersed and custom block schedules, and evaluation protocols."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Sequence

from .core import BlockType, ExperienceRecord, LLError, TaskId
from .rng import Xoshiro256, derive_seed, splitmix_stream

SCENARIO_TYPES = ("condensed", "dispersed", "custom")
MIN_LIFETIMES = 11


class ScenarioError(LLError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    name: str
    variants: tuple[str, ...] = ()


@dataclass(frozen=True)
class ScenarioSpec:
    tasks: tuple[TaskSpec, ...]
    lb_length: int
    eb_length_per_task: int
    scenario_type: str = "condensed"
    num_superblocks: int = 3
    custom_pattern: tuple[int, ...] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.task_variants():
            raise ScenarioError("E_BAD_SPEC", "scenario needs at least one task variant")
        if len(set(self.task_variants())) != len(self.task_variants()):
            raise ScenarioError("E_BAD_SPEC", "task variants must be unique")
        if self.scenario_type not in SCENARIO_TYPES:
            raise ScenarioError("E_BAD_SPEC", f"scenario_type must be one of {SCENARIO_TYPES}")
        if self.lb_length < 1 or self.eb_length_per_task < 1:
            raise ScenarioError("E_BAD_SPEC", "lb_length and eb_length_per_task must be positive")
        if self.num_superblocks < 1:
            raise ScenarioError("E_BAD_SPEC", "num_superblocks must be positive")
        if not 0 <= self.seed < 2**64:
            raise ScenarioError("E_BAD_SPEC", "seed must be an unsigned 64-bit integer")

    def task_variants(self) -> list[TaskId]:
        out = []
        for task in self.tasks:
            if task.variants:
                out.extend(TaskId(task.name, v) for v in task.variants)
            else:
                out.append(TaskId(task.name))
        return out

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return ScenarioSpec(
            self.tasks, self.lb_length, self.eb_length_per_task, self.scenario_type,
            self.num_superblocks, self.custom_pattern, seed,
        )

    def to_mapping(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "tasks": [{"name": t.name, "variants": list(t.variants)} for t in self.tasks],
            "lb_length": self.lb_length,
            "eb_length_per_task": self.eb_length_per_task,
            "scenario_type": self.scenario_type,
            "num_superblocks": self.num_superblocks,
            # TOML integers are signed 64-bit
            "seed": self.seed if self.seed < 2**63 else f"0x{self.seed:016x}",
        }
        if self.custom_pattern is not None:
            out["custom_pattern"] = list(self.custom_pattern)
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_mapping(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ScenarioSpec":
        known = {"tasks", "lb_length", "eb_length_per_task", "scenario_type", "num_superblocks", "custom_pattern", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError("E_BAD_SPEC", f"unknown scenario keys: {sorted(unknown)}")
        for key in ("tasks", "lb_length", "eb_length_per_task"):
            if key not in data:
                raise ScenarioError("E_BAD_SPEC", f"scenario.{key} is required")
        tasks = []
        for i, entry in enumerate(data["tasks"]):
            if isinstance(entry, str):
                tasks.append(TaskSpec(entry))
            elif isinstance(entry, Mapping) and isinstance(entry.get("name"), str):
                tasks.append(TaskSpec(entry["name"], tuple(entry.get("variants", ()))))
            else:
                raise ScenarioError("E_BAD_SPEC", f"scenario.tasks[{i}] needs a string 'name'")
        seed = data.get("seed", 0)
        if isinstance(seed, str):
            seed = int(seed, 0)
        spec = cls(
            tasks=tuple(tasks),
            lb_length=_int_field(data, "lb_length"),
            eb_length_per_task=_int_field(data, "eb_length_per_task"),
            scenario_type=data.get("scenario_type", "condensed"),
            num_superblocks=_int_field(data, "num_superblocks", 3),
            custom_pattern=None,
            seed=seed,
        )
        pattern = data.get("custom_pattern")
        if pattern is not None:
            labels = {t.label: i for i, t in enumerate(spec.task_variants())}
            ordinals = []
            for item in pattern:
                if isinstance(item, str):
                    if item not in labels:
                        raise ScenarioError("E_BAD_PATTERN", f"unknown task variant {item!r} in custom_pattern")
                    ordinals.append(labels[item])
                else:
                    ordinals.append(int(item))
            spec = ScenarioSpec(
                spec.tasks, spec.lb_length, spec.eb_length_per_task, spec.scenario_type,
                spec.num_superblocks, tuple(ordinals), spec.seed,
            )
        return spec


def _int_field(data: Mapping[str, Any], key: str, default: int | None = None) -> int:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError("E_BAD_SPEC", f"scenario.{key} must be an integer")
    return value


@dataclass(frozen=True)
class PlannedBlock:
    block_type: BlockType
    tasks: tuple[TaskId, ...]
    length: int  # experiences per task

    @property
    def size(self) -> int:
        return self.length * len(self.tasks)


@dataclass(frozen=True)
class BlockSchedule:
    blocks: tuple[PlannedBlock, ...]
    provenance: Mapping[str, Any] = field(default_factory=dict)

    @property
    def learning_blocks(self) -> list[PlannedBlock]:
        return [b for b in self.blocks if b.block_type is BlockType.LEARNING]

    @property
    def evaluation_blocks(self) -> list[PlannedBlock]:
        return [b for b in self.blocks if b.block_type is BlockType.EVALUATION]

    def lx_per_task(self) -> dict[TaskId, int]:
        out: dict[TaskId, int] = {}
        for b in self.learning_blocks:
            out[b.tasks[0]] = out.get(b.tasks[0], 0) + b.length
        return out

    def iter_experiences(self) -> Iterator[tuple[int, int, PlannedBlock, TaskId]]:
        """(exp_num, block_num, block, task) for every planned experience."""
        exp = 0
        for block_num, block in enumerate(self.blocks):
            for task in block.tasks:
                for _ in range(block.length):
                    yield exp, block_num, block, task
                    exp += 1

    def to_records(self, run_id: str = "plan") -> list[ExperienceRecord]:
        """The schedule as a log with empty measure maps."""
        return [
            ExperienceRecord(run_id, exp, block_num, block.block_type, task, {})
            for exp, block_num, block, task in self.iter_experiences()
        ]


def _eval_block(spec: ScenarioSpec) -> PlannedBlock:
    return PlannedBlock(BlockType.EVALUATION, tuple(spec.task_variants()), spec.eb_length_per_task)


def _interleave(spec: ScenarioSpec, order: Sequence[TaskId], lb_length: int) -> list[PlannedBlock]:
    blocks = [_eval_block(spec)]
    for task in order:
        blocks.append(PlannedBlock(BlockType.LEARNING, (task,), lb_length))
        blocks.append(_eval_block(spec))
    return blocks


def _provenance(spec: ScenarioSpec, permutations: list[list[str]]) -> dict[str, Any]:
    return {"spec_sha256": spec.digest(), "seed": spec.seed, "permutations": permutations}


def generate_condensed(spec: ScenarioSpec) -> BlockSchedule:
    """One long learning block per task variant, in a seeded random order."""
    if spec.scenario_type != "condensed":
        raise ScenarioError("E_BAD_SPEC", "generate_condensed needs scenario_type 'condensed'")
    order = spec.task_variants()
    Xoshiro256(spec.seed).shuffle(order)
    blocks = _interleave(spec, order, spec.lb_length)
    return BlockSchedule(tuple(blocks), _provenance(spec, [[t.label for t in order]]))


def generate_dispersed(spec: ScenarioSpec) -> BlockSchedule:
    """Superblocks, each a fresh permutation of all variants with shortened learning blocks."""
    if spec.scenario_type != "dispersed":
        raise ScenarioError("E_BAD_SPEC", "generate_dispersed needs scenario_type 'dispersed'")
    if spec.lb_length % spec.num_superblocks:
        raise ScenarioError(
            "E_INDIVISIBLE", f"lb_length {spec.lb_length} is not divisible by {spec.num_superblocks} superblocks"
        )
    short = spec.lb_length // spec.num_superblocks
    order: list[TaskId] = []
    perms = []
    for k in range(spec.num_superblocks):
        perm = spec.task_variants()
        Xoshiro256(derive_seed(spec.seed, k)).shuffle(perm)
        perms.append([t.label for t in perm])
        order.extend(perm)
    return BlockSchedule(tuple(_interleave(spec, order, short)), _provenance(spec, perms))


def generate_custom(spec: ScenarioSpec) -> BlockSchedule:
    """Learning blocks in the exact order of ``custom_pattern`` (ordinals into the variant list)."""
    variants = spec.task_variants()
    pattern = spec.custom_pattern
    if not pattern:
        raise ScenarioError("E_BAD_PATTERN", "custom_pattern must be a non-empty list")
    for ordinal in pattern:
        if not 0 <= ordinal < len(variants):
            raise ScenarioError("E_BAD_PATTERN", f"ordinal {ordinal} out of range for {len(variants)} variants")
    order = [variants[i] for i in pattern]
    return BlockSchedule(tuple(_interleave(spec, order, spec.lb_length)), _provenance(spec, []))


def generate(spec: ScenarioSpec) -> BlockSchedule:
    return {
        "condensed": generate_condensed,
        "dispersed": generate_dispersed,
        "custom": generate_custom,
    }[spec.scenario_type](spec)


@dataclass(frozen=True)
class EvaluationProtocol:
    spec: ScenarioSpec
    num_lifetimes: int
    seeds: tuple[int, ...]
    master_seed: int
    pre_deployment_note: str = ""
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.spec.to_mapping(),
            "num_lifetimes": self.num_lifetimes,
            "master_seed": self.master_seed,
            "seeds": list(self.seeds),
            "pre_deployment_note": self.pre_deployment_note,
            "warnings": list(self.warnings),
        }


def build_protocol(
    spec: ScenarioSpec, num_lifetimes: int, master_seed: int, pre_deployment_note: str = ""
) -> EvaluationProtocol:
    """Per-lifetime seeds drawn from a splitmix64 stream of ``master_seed``."""
    if num_lifetimes < 1:
        raise ScenarioError("E_BAD_SPEC", "num_lifetimes must be at least 1")
    stream = splitmix_stream(master_seed)
    seeds = tuple(next(stream) for _ in range(num_lifetimes))
    warnings = ()
    if num_lifetimes < MIN_LIFETIMES:
        warnings = (f"W_UNDERPOWERED: {num_lifetimes} lifetimes is below the recommended {MIN_LIFETIMES}",)
    return EvaluationProtocol(spec, num_lifetimes, seeds, master_seed, pre_deployment_note, warnings)
