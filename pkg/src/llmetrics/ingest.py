"""Reading, validating and assembling JSON Lines lifetime logs.

Each non-blank line of a log is one experience::

    {"run_id": "r1", "exp_num": 0, "block_num": 0, "block_type": "evaluation",
     "task_name": "A", "measures": {"reward": 1.0}}

``variant_name``, ``timestamp`` and ``worker_id`` are optional; any other key is
kept verbatim in ``ExperienceRecord.extras``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

from .core import (
    Block,
    BlockType,
    ExperienceRecord,
    LearningBlockInfo,
    Lifetime,
    LLError,
    TaskId,
    task_set_of,
)

REQUIRED_FIELDS = ("run_id", "exp_num", "block_num", "block_type", "task_name", "measures")
OPTIONAL_FIELDS = ("variant_name", "timestamp", "worker_id")
_KNOWN = set(REQUIRED_FIELDS) | set(OPTIONAL_FIELDS)


class LogFormatError(LLError):
    pass


@dataclass(frozen=True)
class Finding:
    line: int | None
    code: str
    message: str

    def to_dict(self) -> dict[str, Any]:
        return {"line": self.line, "code": self.code, "message": self.message}


@dataclass
class ValidationReport:
    run_id: str
    errors: list[Finding] = field(default_factory=list)
    warnings: list[Finding] = field(default_factory=list)

    @property
    def is_usable(self) -> bool:
        return not self.errors

    def error(self, code: str, message: str, line: int | None = None) -> None:
        self.errors.append(Finding(line, code, message))

    def warn(self, code: str, message: str, line: int | None = None) -> None:
        self.warnings.append(Finding(line, code, message))

    def codes(self) -> set[str]:
        return {f.code for f in self.errors} | {f.code for f in self.warnings}

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "is_usable": self.is_usable,
            "errors": [f.to_dict() for f in self.errors],
            "warnings": [f.to_dict() for f in self.warnings],
        }


# -- parsing -----------------------------------------------------------------


def _reject_constant(name: str) -> float:
    # NaN / Infinity literals are accepted by the json module; keep them so the
    # finiteness check below reports E_NONFINITE instead of a parse failure.
    return float(name)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def parse_record(obj: Any, line: int | None = None) -> ExperienceRecord:
    if not isinstance(obj, dict):
        raise LogFormatError("E_PARSE", "line is not a JSON object", line)
    for key in REQUIRED_FIELDS:
        if key not in obj:
            raise LogFormatError("E_MISSING_FIELD", f"missing required field {key!r}", line)

    run_id = obj["run_id"]
    if not isinstance(run_id, str):
        raise LogFormatError("E_BAD_FIELD", "run_id must be a string", line)
    for key in ("exp_num", "block_num"):
        if not _is_int(obj[key]) or obj[key] < 0:
            raise LogFormatError("E_BAD_FIELD", f"{key} must be a non-negative integer", line)
    try:
        block_type = BlockType(obj["block_type"])
    except ValueError:
        raise LogFormatError(
            "E_BAD_FIELD", f"block_type must be 'learning' or 'evaluation', got {obj['block_type']!r}", line
        ) from None
    task_name = obj["task_name"]
    if not isinstance(task_name, str) or not task_name:
        raise LogFormatError("E_BAD_FIELD", "task_name must be a non-empty string", line)
    variant = obj.get("variant_name")
    if variant is not None and not isinstance(variant, str):
        raise LogFormatError("E_BAD_FIELD", "variant_name must be a string", line)
    for key in ("timestamp", "worker_id"):
        if key in obj and obj[key] is not None and not isinstance(obj[key], str):
            raise LogFormatError("E_BAD_FIELD", f"{key} must be a string", line)

    raw_measures = obj["measures"]
    if not isinstance(raw_measures, dict):
        raise LogFormatError("E_BAD_FIELD", "measures must be an object", line)
    measures: dict[str, float] = {}
    for name, value in raw_measures.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise LogFormatError("E_NONFINITE", f"measure {name!r} is not a number: {value!r}", line)
        value = float(value)
        if not math.isfinite(value):
            raise LogFormatError("E_NONFINITE", f"measure {name!r} is not finite", line)
        measures[name] = value

    extras = {k: v for k, v in obj.items() if k not in _KNOWN}
    return ExperienceRecord(
        run_id=run_id,
        exp_num=obj["exp_num"],
        block_num=obj["block_num"],
        block_type=block_type,
        task=TaskId(task_name, variant),
        measures=measures,
        timestamp=obj.get("timestamp"),
        worker_id=obj.get("worker_id"),
        extras=extras,
        line=line,
    )


def parse_log(lines: Iterable[str]) -> list[ExperienceRecord]:
    """Parse JSONL text lines into records; raises LogFormatError on the first bad line."""
    records = []
    for lineno, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        try:
            obj = json.loads(text, parse_constant=_reject_constant)
        except json.JSONDecodeError as exc:
            raise LogFormatError("E_PARSE", f"malformed JSON: {exc.msg}", lineno) from None
        records.append(parse_record(obj, lineno))
    return records


def read_log(path: str | Path) -> list[ExperienceRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_log(fh)


def record_to_dict(rec: ExperienceRecord) -> dict[str, Any]:
    out: dict[str, Any] = {
        "run_id": rec.run_id,
        "exp_num": rec.exp_num,
        "block_num": rec.block_num,
        "block_type": rec.block_type.value,
        "task_name": rec.task.task_name,
    }
    if rec.task.variant_name is not None:
        out["variant_name"] = rec.task.variant_name
    out["measures"] = dict(rec.measures)
    if rec.timestamp is not None:
        out["timestamp"] = rec.timestamp
    if rec.worker_id is not None:
        out["worker_id"] = rec.worker_id
    out.update(rec.extras)
    return out


def serialize(records: Iterable[ExperienceRecord]) -> Iterator[str]:
    """Yield one canonical JSON line (with trailing newline) per record."""
    for rec in records:
        yield json.dumps(record_to_dict(rec), separators=(",", ":"), ensure_ascii=False) + "\n"


def write_log(path: str | Path, records: Iterable[ExperienceRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(serialize(records))


def read_csv(path: str | Path, run_id: str | None = None) -> list[ExperienceRecord]:
    """Import a fixed-column CSV log.

    Columns ``exp_num, block_num, block_type, task_name`` are required, ``run_id``
    and ``variant_name`` optional; every other column is treated as a measure.
    """
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            obj: dict[str, Any] = {"run_id": row.pop("run_id", None) or run_id or Path(path).stem}
            try:
                obj["exp_num"] = int(row.pop("exp_num"))
                obj["block_num"] = int(row.pop("block_num"))
            except (KeyError, TypeError):
                raise LogFormatError("E_MISSING_FIELD", "exp_num/block_num column missing", lineno) from None
            except ValueError:
                raise LogFormatError("E_BAD_FIELD", "exp_num/block_num must be integers", lineno) from None
            for key in ("block_type", "task_name"):
                if key not in row:
                    raise LogFormatError("E_MISSING_FIELD", f"{key} column missing", lineno)
                obj[key] = row.pop(key)
            variant = row.pop("variant_name", None)
            if variant:
                obj["variant_name"] = variant
            measures = {}
            for name, text in row.items():
                if text is None or text == "":
                    continue
                try:
                    measures[name] = float(text)
                except ValueError:
                    raise LogFormatError("E_NONFINITE", f"measure {name!r} is not a number", lineno) from None
            obj["measures"] = measures
            records.append(parse_record(obj, lineno))
    return records


def split_runs(records: Sequence[ExperienceRecord]) -> dict[str, list[ExperienceRecord]]:
    """Group records by run_id, keeping file order within each run."""
    runs: dict[str, list[ExperienceRecord]] = {}
    for rec in records:
        runs.setdefault(rec.run_id, []).append(rec)
    return runs


# -- validation --------------------------------------------------------------


def _group_blocks(records: Sequence[ExperienceRecord]) -> list[list[ExperienceRecord]]:
    groups: list[list[ExperienceRecord]] = []
    for rec in records:
        if groups and groups[-1][0].block_num == rec.block_num:
            groups[-1].append(rec)
        else:
            groups.append([rec])
    return groups


def validate_run(
    records: Sequence[ExperienceRecord],
    expected_tasks: Iterable[TaskId] | None = None,
) -> ValidationReport:
    """Check record, block and lifetime invariants for one run; never raises."""
    run_id = records[0].run_id if records else ""
    report = ValidationReport(run_id)
    if not records:
        report.error("E_EMPTY_RUN", "run has no records")
        return report

    prev: ExperienceRecord | None = None
    for rec in records:
        if rec.run_id != run_id:
            report.error("E_RUN_ID_MIXED", f"record belongs to run {rec.run_id!r}, expected {run_id!r}", rec.line)
        if not rec.measures:
            report.error("E_EMPTY_MEASURES", "record has no measures", rec.line)
        for name, value in rec.measures.items():
            if not math.isfinite(value):
                report.error("E_NONFINITE", f"measure {name!r} is not finite", rec.line)
        if prev is not None:
            if rec.exp_num <= prev.exp_num:
                report.error("E_EXP_ORDER", f"exp_num {rec.exp_num} does not increase after {prev.exp_num}", rec.line)
            if rec.block_num < prev.block_num:
                report.error("E_BLOCK_ORDER", f"block_num {rec.block_num} follows {prev.block_num}", rec.line)
        prev = rec

    groups = _group_blocks(records)
    seen_blocks: set[int] = set()
    for group in groups:
        head = group[0]
        if head.block_num in seen_blocks:
            report.error("E_BLOCK_ORDER", f"block {head.block_num} is not contiguous", head.line)
        seen_blocks.add(head.block_num)
        for rec in group[1:]:
            if rec.block_type is not head.block_type:
                report.error("E_BLOCK_TYPE_MIXED", f"block {head.block_num} mixes learning and evaluation", rec.line)
                break
        if head.block_type is BlockType.LEARNING:
            for rec in group[1:]:
                if rec.task != head.task:
                    report.error("E_LB_MULTI_TASK", f"learning block {head.block_num} holds several tasks", rec.line)
                    break
        else:
            closed: set[TaskId] = set()
            for a, b in zip(group, group[1:]):
                if b.task != a.task:
                    closed.add(a.task)
                    if b.task in closed:
                        report.error(
                            "E_EB_TASK_SPLIT",
                            f"task {b.task} is not contiguous in evaluation block {head.block_num}",
                            b.line,
                        )
                        break

    types = [g[0].block_type for g in groups]
    for i in range(1, len(groups)):
        if types[i] is types[i - 1]:
            report.error(
                "E_BLOCK_ALTERNATION",
                f"blocks {groups[i - 1][0].block_num} and {groups[i][0].block_num} are both {types[i].value}",
                groups[i][0].line,
            )
    if BlockType.LEARNING not in types:
        report.error("E_NO_LEARNING_BLOCKS", "run contains no learning blocks")
    else:
        if types[0] is not BlockType.EVALUATION:
            report.warn("W_NO_INITIAL_EVAL", "lifetime does not start with an evaluation block", groups[0][0].line)
        if types[-1] is not BlockType.EVALUATION:
            report.warn("W_NO_FINAL_EVAL", "lifetime does not end with an evaluation block", groups[-1][0].line)

    all_tasks = {rec.task for rec in records}
    expected = set(expected_tasks) if expected_tasks is not None else all_tasks
    for group in groups:
        if group[0].block_type is not BlockType.EVALUATION:
            continue
        present = {rec.task for rec in group}
        for task in sorted(expected - present, key=TaskId.sort_key):
            report.warn(
                "W_MISSING_EVAL_TASK",
                f"evaluation block {group[0].block_num} has no experience for task {task}",
                group[0].line,
            )
    return report


def assemble_lifetime(records: Sequence[ExperienceRecord]) -> Lifetime:
    """Group validated records into blocks and number the learning blocks 1..N."""
    if not records:
        raise LLError("E_EMPTY_RUN", "run has no records")
    blocks = []
    infos = []
    for group in _group_blocks(records):
        block = Block(group[0].block_num, group[0].block_type, tuple(group))
        if block.block_type is BlockType.LEARNING:
            infos.append(LearningBlockInfo(len(infos) + 1, block.task, len(block), len(blocks)))
        blocks.append(block)
    if not infos:
        raise LLError("E_NO_LEARNING_BLOCKS", "run contains no learning blocks")
    lifetime = Lifetime(records[0].run_id, tuple(blocks), frozenset(), tuple(infos))
    return Lifetime(lifetime.run_id, lifetime.blocks, task_set_of(lifetime), lifetime.learning_blocks)


def load_lifetimes(
    paths: Iterable[str | Path],
    expected_tasks: Iterable[TaskId] | None = None,
) -> tuple[list[Lifetime], list[ValidationReport]]:
    """Read every run from the given files; unusable runs produce a report but no lifetime."""
    lifetimes, reports = [], []
    for path in paths:
        for run_records in split_runs(read_log(path)).values():
            report = validate_run(run_records, expected_tasks)
            reports.append(report)
            if report.is_usable:
                lifetimes.append(assemble_lifetime(run_records))
    return lifetimes, reports


@dataclass(frozen=True)
class STERun:
    """Raw single-task-expert learning values for one task, per learning block."""

    task: TaskId
    run_id: str
    blocks: tuple[tuple[Mapping[str, float], ...], ...]

    def values(self, measure: str) -> list[list[float]]:
        return [[m[measure] for m in block if measure in m] for block in self.blocks]


def ste_runs_from_records(records: Sequence[ExperienceRecord]) -> list[STERun]:
    out = []
    for run_id, recs in split_runs(records).items():
        tasks = {r.task for r in recs}
        if len(tasks) != 1:
            raise LLError("E_STE_MULTI_TASK", f"STE run {run_id!r} covers {len(tasks)} tasks")
        if any(r.block_type is not BlockType.LEARNING for r in recs):
            raise LLError("E_STE_EVAL_BLOCK", f"STE run {run_id!r} contains evaluation experiences")
        blocks = tuple(tuple(r.measures for r in group) for group in _group_blocks(recs))
        out.append(STERun(recs[0].task, run_id, blocks))
    return out


def load_ste_dir(directory: str | Path) -> dict[TaskId, list[STERun]]:
    """Load every ``*.jsonl`` STE log under ``directory``, grouped by task."""
    by_task: dict[TaskId, list[STERun]] = {}
    for path in sorted(Path(directory).glob("*.jsonl")):
        for run in ste_runs_from_records(read_log(path)):
            by_task.setdefault(run.task, []).append(run)
    for runs in by_task.values():
        runs.sort(key=lambda r: r.run_id)
    return by_task
