from __future__ import annotations

import logging
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llmetrics.core import BlockType, ExperienceRecord, LLError
from llmetrics.ingest import STERun, assemble_lifetime
from llmetrics.preprocess import (
    PreprocessConfig,
    effective_window,
    prepare,
    shift_offset,
    shift_range,
    smooth_series,
    summarize_blocks,
    summarize_ste,
)

from conftest import A, B, lifetime, records

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
odd = st.integers(0, 40).map(lambda k: 2 * k + 1)


def brute_smooth(values, window):
    half = window // 2
    out = []
    for i in range(len(values)):
        picked = [values[j] for j in range(len(values)) if abs(j - i) <= half]
        out.append(sum(picked) / len(picked))
    return out


class TestSmooth:
    def test_identity_window(self):
        assert smooth_series([1, 2, 3, 4, 5], 1) == [1, 2, 3, 4, 5]

    def test_boundary_clipped_example(self):
        assert smooth_series([0, 0, 6, 0, 0], 3) == [0, 2, 2, 2, 0]
        assert brute_smooth([0, 0, 6, 0, 0], 3) == [0, 2, 2, 2, 0]

    def test_constant_fixed_point(self):
        for w in (1, 3, 9, 65, 101):
            assert smooth_series([2.5] * 30, w) == [2.5] * 30

    @pytest.mark.parametrize("window", [0, 2, -1, 10])
    def test_bad_window(self, window):
        with pytest.raises(LLError) as exc:
            smooth_series([1.0], window)
        assert exc.value.code == "E_BAD_WINDOW"

    def test_empty(self):
        with pytest.raises(LLError) as exc:
            smooth_series([], 3)
        assert exc.value.code == "E_EMPTY_SERIES"

    @settings(max_examples=300, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=60), odd)
    def test_matches_brute_force_and_stays_in_range(self, values, window):
        out = smooth_series(values, window)
        assert len(out) == len(values)
        for got, want in zip(out, brute_smooth(values, window)):
            assert math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-6)
        lo, hi = min(values), max(values)
        assert all(lo - 1e-9 <= v <= hi + 1e-9 for v in out)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 100), min_size=70, max_size=200), st.integers(32, 60).map(lambda k: 2 * k + 1))
    def test_wide_window_path(self, values, window):
        for got, want in zip(smooth_series(values, window), brute_smooth(values, window)):
            assert math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-9)


def test_effective_window():
    assert effective_window(9, 20) == 9
    assert effective_window(9, 4) == 3
    assert effective_window(9, 5) == 5
    assert effective_window(9, 1) == 1


class TestShift:
    def test_already_positive(self):
        (out,), offset = shift_range([2, 5, 9])
        assert offset == 0 and out == [2, 5, 9]

    def test_negative_range(self):
        (out,), offset = shift_range([-1, 0, 3])
        assert offset == pytest.approx(1.004, rel=1e-15)
        assert min(out) > 0 and min(out) == pytest.approx(0.004)

    def test_constant_zero(self):
        (out,), offset = shift_range([0, 0, 0])
        assert offset == 0.001 and out == [0.001] * 3

    def test_joint_over_series(self):
        (a, b), offset = shift_range([1, 2], [-3, 5])
        assert offset == pytest.approx(3 + 0.001 * 8)
        assert a[0] - b[0] == pytest.approx(4)

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.lists(finite, min_size=1, max_size=10), min_size=1, max_size=3))
    def test_positive_and_order_preserving(self, series):
        shifted, offset = shift_range(*series)
        flat_in = [v for s in series for v in s]
        flat_out = [v for s in shifted for v in s]
        if min(flat_in) <= 0:
            assert all(v > 0 for v in flat_out)
        else:
            assert offset == 0
        for i in range(len(flat_in)):
            for j in range(len(flat_in)):
                if flat_in[i] < flat_in[j]:
                    assert flat_out[i] <= flat_out[j]

    def test_shift_offset_empty(self):
        assert shift_offset([[]]) == 0.0


class TestSummarize:
    def test_eval_mean_and_identity_smoothing(self):
        lt = lifetime([("evaluation", {A: [2, 4]}), ("learning", {A: [1, 2, 3, 4, 5]}), ("evaluation", {A: [5, 7]})])
        s = summarize_blocks(lt, "perf", PreprocessConfig(smoothing_window=1))
        assert s.eval[(0, A)] == 3 and s.eval[(1, A)] == 6
        assert s.learn[1] == (1, 2, 3, 4, 5)
        assert s.manifest.to_dict()["offsets"] == {"A": 0.0}

    def test_median_summarizer(self):
        lt = lifetime([("evaluation", {A: [1, 2, 9]}), ("learning", {A: [1]}), ("evaluation", {A: [1]})])
        s = summarize_blocks(lt, "perf", PreprocessConfig(eval_summarizer="median"))
        assert s.eval[(0, A)] == 2

    def test_no_initial_eval(self):
        lt = lifetime([("learning", {A: [1, 2]}), ("evaluation", {A: [3], B: [1]}), ("learning", {B: [1]})])
        s = summarize_blocks(lt, "perf")
        assert not any(n == 0 for n, _ in s.eval)

    def test_measure_absent(self, two_task_lifetime):
        with pytest.raises(LLError) as exc:
            summarize_blocks(two_task_lifetime, "reward")
        assert exc.value.code == "E_MEASURE_ABSENT"

    def test_records_missing_measure_are_skipped(self, caplog):
        recs = records([("evaluation", {A: [2, 4]}), ("learning", {A: [1, 2]}), ("evaluation", {A: [5]})])
        recs[1] = ExperienceRecord("r1", 1, 0, BlockType.EVALUATION, A, {"other": 100.0})
        with caplog.at_level(logging.WARNING):
            s = summarize_blocks(assemble_lifetime(recs), "perf")
        assert s.eval[(0, A)] == 2
        assert "lack measure" in caplog.text

    def test_shift_applied_per_task(self):
        lt = lifetime([("evaluation", {A: [-1, -1], B: [1]}), ("learning", {A: [3]}), ("evaluation", {A: [0], B: [1]})])
        s = summarize_blocks(lt, "perf")
        off = 1 + 0.001 * 4
        assert s.eval[(0, A)] == pytest.approx(-1 + off)
        assert s.eval[(0, B)] == 1
        assert s.learn[1] == pytest.approx((3 + off,))

    def test_smoothing_stays_within_blocks(self):
        lt = lifetime([
            ("evaluation", {A: [1]}), ("learning", {A: [1, 1, 1, 1]}), ("evaluation", {A: [1]}),
            ("learning", {A: [9, 9, 9]}), ("evaluation", {A: [1]}),
        ])
        s = summarize_blocks(lt, "perf", PreprocessConfig(smoothing_window=5))
        assert s.learn[1] == (1, 1, 1, 1) and s.learn[2] == (9, 9, 9)
        assert s.stitched(A) == [1, 1, 1, 1, 9, 9, 9]

    def test_deterministic(self, two_task_lifetime):
        assert summarize_blocks(two_task_lifetime, "perf") == summarize_blocks(two_task_lifetime, "perf")

    def test_measure_key_order_irrelevant(self):
        def build(order):
            recs = []
            for i, (kind, v) in enumerate([("evaluation", 1.0), ("learning", 2.0), ("evaluation", 3.0)]):
                values = {"x": v, "y": 10 * v}
                recs.append(ExperienceRecord("r", i, i, BlockType(kind), A, {k: values[k] for k in order}))
            return assemble_lifetime(recs)

        a = summarize_blocks(build(["x", "y"]), "y")
        b = summarize_blocks(build(["y", "x"]), "y")
        assert a == b


class TestSTE:
    def test_single_run_smoothed_per_block(self):
        run = STERun(A, "s", (({"perf": 0.0}, {"perf": 0.0}, {"perf": 6.0}), ({"perf": 9.0},)))
        curve = summarize_ste([run], "perf", PreprocessConfig(smoothing_window=3))
        assert curve.series == (0.0, 2.0, 3.0, 9.0)

    def test_runs_averaged_and_truncated(self):
        r1 = STERun(A, "s1", tuple(({"perf": v},) for v in (1.0, 2.0, 3.0)))
        r2 = STERun(A, "s2", tuple(({"perf": v},) for v in (3.0, 4.0)))
        curve = summarize_ste([r1, r2], "perf")
        assert curve.series == (2.0, 3.0)
        assert curve.source_run_ids == ("s1", "s2")

    def test_no_runs(self):
        with pytest.raises(LLError) as exc:
            summarize_ste([], "perf")
        assert exc.value.code == "E_NO_STE"

    def test_prepare_shifts_jointly(self):
        lt = lifetime([("evaluation", {A: [1]}), ("learning", {A: [2, 2]}), ("evaluation", {A: [3]})])
        ste = {A: [STERun(A, "s", (({"perf": -2.0}, {"perf": 0.0}),))]}
        prepared = prepare(lt, "perf", PreprocessConfig(smoothing_window=1), ste)
        off = 2 + 0.001 * 5
        assert prepared.summaries.manifest.offsets[A] == pytest.approx(off)
        assert prepared.ste[A].series == pytest.approx((-2 + off, off))
        assert prepared.summaries.learn[1] == pytest.approx((2 + off, 2 + off))


def test_config_from_mapping():
    cfg = PreprocessConfig.from_mapping({"smoothing_window": 5, "eval_summarizer": "median"})
    assert cfg.smoothing_window == 5 and cfg.range_shift
    with pytest.raises(LLError):
        PreprocessConfig.from_mapping({"window": 5})
    with pytest.raises(LLError):
        PreprocessConfig(eval_summarizer="max")
    with pytest.raises(LLError):
        PreprocessConfig(smoothing_window=4)
