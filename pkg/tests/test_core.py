from __future__ import annotations

import pytest

from llmetrics.core import LLError, STECurve, TaskId, sequence_mean

from conftest import A, B, lifetime


class TestTaskId:
    def test_label_and_parse_round_trip(self):
        for label in ("A", "A/x", "nav/day"):
            assert TaskId.parse(label).label == label

    def test_variants_are_distinct_tasks(self):
        assert TaskId("A", "x") != TaskId("A", "y")
        assert TaskId("A") != TaskId("A", "x")

    def test_sort_key_puts_base_before_variants(self):
        ids = [TaskId("B"), TaskId("A", "y"), TaskId("A"), TaskId("A", "x")]
        assert [t.label for t in sorted(ids, key=TaskId.sort_key)] == ["A", "A/x", "A/y", "B"]

    def test_empty_name_rejected(self):
        with pytest.raises(ValueError):
            TaskId("")


def test_llerror_message_carries_code_and_line():
    err = LLError("E_PARSE", "bad", line=4)
    assert err.code == "E_PARSE" and err.line == 4
    assert str(err) == "E_PARSE (line 4): bad"


def test_lifetime_accessors(two_task_lifetime):
    lt = two_task_lifetime
    assert lt.num_learning_blocks == 2
    assert lt.block_task(1) == A and lt.block_task(2) == B
    assert lt.has_initial_eval
    assert lt.eval_block_after(0) is lt.blocks[0]
    assert lt.eval_block_after(2) is lt.blocks[4]
    assert lt.task_set == {A, B}
    assert sum(len(b) for b in lt.blocks) == len(list(lt.records()))


def test_eval_block_after_missing():
    lt = lifetime([("learning", {A: [1, 2]}), ("evaluation", {A: [1]}), ("learning", {B: [1]})])
    assert not lt.has_initial_eval
    assert lt.eval_block_after(0) is None
    assert lt.eval_block_after(2) is None


def test_ste_curve_validation():
    with pytest.raises(LLError) as exc:
        STECurve(A, "perf", ())
    assert exc.value.code == "E_EMPTY_SERIES"
    with pytest.raises(LLError) as exc:
        STECurve(A, "perf", (1.0, float("nan")))
    assert exc.value.code == "E_NONFINITE"


def test_sequence_mean():
    assert sequence_mean([0.1] * 10) == pytest.approx(0.1, abs=0)
