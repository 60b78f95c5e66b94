from __future__ import annotations

from typing import Mapping, Sequence

import pytest

from llmetrics.core import BlockSummaries, BlockType, ExperienceRecord, TaskId
from llmetrics.ingest import assemble_lifetime

A, B, C, D = TaskId("A"), TaskId("B"), TaskId("C"), TaskId("D")


def summaries(
    block_tasks: Sequence[TaskId],
    evals: Mapping[tuple[int, TaskId], float],
    learn: Mapping[int, Sequence[float]] | None = None,
    task_set: Sequence[TaskId] | None = None,
    measure: str = "perf",
) -> BlockSummaries:
    tasks = set(task_set or ()) | set(block_tasks) | {t for _, t in evals}
    return BlockSummaries(
        measure_name=measure,
        task_set=frozenset(tasks),
        block_tasks=tuple(block_tasks),
        eval=dict(evals),
        learn={n: tuple(v) for n, v in (learn or {}).items()},
    )


def records(blocks: Sequence[tuple[str, Mapping[TaskId, Sequence[float]]]], run_id: str = "r1", measure: str = "perf"):
    """Build a run from ``[("evaluation"|"learning", {task: values}), ...]``."""
    out = []
    exp = 0
    for block_num, (kind, per_task) in enumerate(blocks):
        for task, values in per_task.items():
            for v in values:
                out.append(ExperienceRecord(run_id, exp, block_num, BlockType(kind), task, {measure: float(v)}))
                exp += 1
    return out


def lifetime(blocks, run_id: str = "r1", measure: str = "perf"):
    return assemble_lifetime(records(blocks, run_id, measure))


@pytest.fixture
def two_task_lifetime():
    return lifetime([
        ("evaluation", {A: [2, 2], B: [3, 3]}),
        ("learning", {A: [1, 2, 3, 4, 5]}),
        ("evaluation", {A: [6, 6], B: [4, 4]}),
        ("learning", {B: [2, 4, 6]}),
        ("evaluation", {A: [5, 5], B: [8, 8]}),
    ])


def random_summaries(rng, max_tasks: int = 4, max_lbs: int = 6, max_lb_len: int = 12):
    """Random complete summaries (every EB covers every task) plus matching STE curves."""
    from llmetrics.core import STECurve

    tasks = [TaskId(name) for name in "ABCD"[: rng.randint(1, max_tasks)]]
    n_lbs = rng.randint(1, max_lbs)
    block_tasks = [rng.choice(tasks) for _ in range(n_lbs)]
    evals = {(n, t): rng.uniform(0.05, 10.0) for n in range(n_lbs + 1) for t in tasks}
    learn = {n: [rng.uniform(0.05, 10.0) for _ in range(rng.randint(1, max_lb_len))] for n in range(1, n_lbs + 1)}
    s = summaries(block_tasks, evals, learn, tasks)
    ste = {}
    for t in set(block_tasks):
        need = len(s.stitched(t))
        ste[t] = STECurve(t, "perf", tuple(rng.uniform(0.05, 10.0) for _ in range(need + rng.randint(0, 5))))
    return s, ste


# -- acceptance summary ------------------------------------------------------

_criteria: dict[int, tuple[str, str]] = {}
_titles: dict[str, str] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        doc = getattr(item.function, "__doc__", None)
        if "test_criterion_" in item.nodeid and doc:
            _titles[item.nodeid] = doc.strip().splitlines()[0]


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number = int(report.nodeid.split("test_criterion_")[1].split("_")[0])
        title = _titles.get(report.nodeid, report.nodeid)
        _criteria[number] = ("PASS" if report.outcome == "passed" else "FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        outcome, title = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2}: {outcome}  {title}")
