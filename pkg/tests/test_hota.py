"""HOTA engine: unit matching, pooling, finalization, fast-path equivalence."""

import math

import numpy as np
import pytest

from rmot_eval.assignment import solve_oracle
from rmot_eval.hota import (
    AlphaStats,
    accumulate,
    finalize,
    match_unit,
    match_unit_all_alphas,
)
from rmot_eval.model import DEFAULT_ALPHA_GRID, ExpressionTask

from .conftest import box, det, task_from_tracks, track


def simple_task(n_frames=2, b=None, seq="s", expr="e"):
    b = b or box(0, 0, 10, 10)
    tr = track("g1", range(1, n_frames + 1), b)
    return task_from_tracks(seq, expr, "a thing", [(tr, range(1, n_frames + 1))])


class TestMatchUnit:
    def test_perfect_two_frames(self):
        task = simple_task(2)
        preds = [det(1, box(0, 0, 10, 10), "p1"), det(2, box(0, 0, 10, 10), "p1")]
        for alpha in (0.05, 0.5, 0.95):
            s = match_unit(task, preds, alpha, frames=range(1, 3))
            assert (s.tp, s.fn, s.fp) == (2, 0, 0)
            assert s.ass_a_sum == 2.0  # A = 1 for both TPs
            assert s.iou_sum == 2.0

    def test_two_frame_id_switch(self):
        task = simple_task(2)
        preds = [det(1, box(0, 0, 10, 10), "p1"), det(2, box(0, 0, 10, 10), "p2")]
        s = match_unit(task, preds, 0.5, frames=range(1, 3))
        assert (s.tp, s.fn, s.fp) == (2, 0, 0)
        # each TP: TPA=1, FNA=1, FPA=0 -> A = 0.5
        assert s.pair_tpa == {("g1", "p1"): 1, ("g1", "p2"): 1}
        assert s.ass_a_sum == pytest.approx(1.0)

    def test_no_target_with_surviving_predictions(self):
        task = ExpressionTask("s", "e", "nothing here", {})
        preds = [det(f, box(0, 0, 5, 5), "p1") for f in (1, 2, 3)]
        s = match_unit(task, preds, 0.5, frames=range(1, 4))
        assert (s.tp, s.fn, s.fp) == (0, 0, 3)

    def test_half_missed(self):
        task = simple_task(2)
        preds = [det(1, box(0, 0, 10, 10), "p1")]
        s = match_unit(task, preds, 0.5, frames=range(1, 3))
        assert (s.tp, s.fn, s.fp) == (1, 1, 0)
        assert s.ass_a_sum == pytest.approx(0.5)

    def test_below_alpha_not_matched(self):
        task = simple_task(1)
        preds = [det(1, box(5, 0, 10, 10), "p1")]  # iou = 50/150 = 1/3
        low = match_unit(task, preds, 0.3, frames=[1])
        high = match_unit(task, preds, 0.4, frames=[1])
        assert (low.tp, low.fn, low.fp) == (1, 0, 0)
        assert (high.tp, high.fn, high.fp) == (0, 1, 1)

    def test_duplicate_detection_rejected(self):
        task = simple_task(1)
        preds = [det(1, box(0, 0, 10, 10), "p1"), det(1, box(1, 1, 9, 9), "p1")]
        with pytest.raises(ValueError, match="duplicate"):
            match_unit(task, preds, 0.5, frames=[1])

    def test_frames_outside_window_ignored(self):
        task = simple_task(5)
        preds = [det(f, box(0, 0, 10, 10), "p1") for f in range(1, 6)]
        s = match_unit(task, preds, 0.5, frames=[2, 3])
        assert (s.tp, s.fn, s.fp) == (2, 0, 0)

    def test_prior_association_guides_matching(self):
        # gt g1 lives on frames 1-3; pred pA overlaps g1 on all 3 frames,
        # pred pB only on frame 3 but with higher IoU there. The Pass-1
        # prior should keep g1-pA together on frame 3.
        g1 = track("g1", [1, 2, 3], box(0, 0, 10, 10))
        task = task_from_tracks("s", "e", "t", [(g1, [1, 2, 3])])
        preds = [
            det(1, box(0, 0, 10, 10), "pA"),
            det(2, box(0, 0, 10, 10), "pA"),
            det(3, box(1, 0, 10, 10), "pA"),  # iou 9/11
            det(3, box(0, 0, 10, 10), "pB"),  # iou 1.0
        ]
        s = match_unit(task, preds, 0.5, frames=[1, 2, 3])
        assert s.pair_tpa == {("g1", "pA"): 3}
        assert (s.tp, s.fn, s.fp) == (3, 0, 1)


class TestAllAlphasConsistency:
    def test_matches_single_alpha_calls(self):
        g1 = track("g1", [1, 2, 3, 4], box(0, 0, 8, 8))
        g2 = track("g2", [2, 3], box(4, 0, 8, 8))
        task = task_from_tracks("s", "e", "t", [(g1, [1, 2, 3, 4]), (g2, [2, 3])])
        preds = [
            det(1, box(0, 0, 8, 8), "p1"),
            det(2, box(1, 0, 8, 8), "p1"),
            det(2, box(4, 1, 8, 8), "p2"),
            det(3, box(3, 0, 8, 8), "p2"),
            det(4, box(20, 20, 8, 8), "p3"),
        ]
        combined = match_unit_all_alphas(task, preds, DEFAULT_ALPHA_GRID, range(1, 5))
        for stats, alpha in zip(combined, DEFAULT_ALPHA_GRID):
            single = match_unit(task, preds, alpha, frames=range(1, 5))
            assert (stats.tp, stats.fn, stats.fp) == (single.tp, single.fn, single.fp)
            assert stats.iou_sum == single.iou_sum
            assert stats.ass_a_sum == single.ass_a_sum
            assert stats.pair_tpa == single.pair_tpa

    def test_force_solver_bit_identical(self):
        rng = np.random.default_rng(42)
        for trial in range(20):
            n_frames = int(rng.integers(1, 6))
            targets = {}
            preds = []
            for f in range(1, n_frames + 1):
                for gi in range(int(rng.integers(0, 4))):
                    x, y = rng.integers(0, 8, size=2)
                    w, h = rng.integers(1, 6, size=2)
                    targets.setdefault(f, {})[f"g{gi}"] = box(
                        float(x), float(y), float(w), float(h)
                    )
                for pi in range(int(rng.integers(0, 4))):
                    x, y = rng.integers(0, 8, size=2)
                    w, h = rng.integers(1, 6, size=2)
                    preds.append(
                        det(f, box(float(x), float(y), float(w), float(h)), f"p{pi}")
                    )
            task = ExpressionTask("s", "e", "t", targets)
            fast = match_unit_all_alphas(task, preds, DEFAULT_ALPHA_GRID, range(1, n_frames + 1))
            slow = match_unit_all_alphas(
                task, preds, DEFAULT_ALPHA_GRID, range(1, n_frames + 1), force_solver=True
            )
            for a, b in zip(fast, slow):
                assert (a.tp, a.fn, a.fp) == (b.tp, b.fn, b.fp)
                assert a.iou_sum == b.iou_sum
                assert a.ass_a_sum == b.ass_a_sum
                assert a.ass_re_sum == b.ass_re_sum
                assert a.ass_pr_sum == b.ass_pr_sum
                assert a.pair_tpa == b.pair_tpa

    def test_invalid_alpha_rejected(self):
        task = simple_task(1)
        with pytest.raises(ValueError):
            match_unit_all_alphas(task, [], [0.0], [1])
        with pytest.raises(ValueError):
            match_unit_all_alphas(task, [], [1.0], [1])

    def test_relabel_invariance(self):
        g1 = track("zz", [1, 2], box(0, 0, 8, 8))
        g2 = track("aa", [1, 2], box(20, 0, 8, 8))
        task = task_from_tracks("s", "e", "t", [(g1, [1, 2]), (g2, [1, 2])])
        preds = [
            det(1, box(0, 0, 8, 8), "x9"), det(2, box(1, 0, 8, 8), "x9"),
            det(1, box(20, 0, 8, 8), "x1"), det(2, box(20, 1, 8, 8), "x1"),
        ]
        base = match_unit_all_alphas(task, preds, DEFAULT_ALPHA_GRID, [1, 2])

        relabeled_task = ExpressionTask(
            "s", "e", "t",
            {f: {f"T-{t}": b for t, b in row.items()} for f, row in task.targets.items()},
        )
        relabeled_preds = [
            det(d.frame, d.box, f"P-{d.track_id}") for d in preds
        ]
        other = match_unit_all_alphas(
            relabeled_task, relabeled_preds, DEFAULT_ALPHA_GRID, [1, 2]
        )
        for a, b in zip(base, other):
            assert (a.tp, a.fn, a.fp) == (b.tp, b.fn, b.fp)
            assert a.iou_sum == b.iou_sum
            assert a.ass_a_sum == b.ass_a_sum


class TestAccumulate:
    def test_single_unit_identity(self):
        task = simple_task(3)
        preds = [det(f, box(0, 0, 10, 10), "p1") for f in (1, 2, 3)]
        unit = match_unit_all_alphas(task, preds, (0.5,), range(1, 4))
        pooled = accumulate([unit])
        assert (pooled[0].tp, pooled[0].fn, pooled[0].fp) == (3, 0, 0)
        assert pooled[0].iou_sum == unit[0].iou_sum

    def test_two_disjoint_perfect_units(self):
        units = []
        for n in (2, 3):
            task = simple_task(n)
            preds = [det(f, box(0, 0, 10, 10), "p1") for f in range(1, n + 1)]
            units.append(match_unit_all_alphas(task, preds, (0.5,), range(1, n + 1)))
        pooled = accumulate(units)
        assert (pooled[0].tp, pooled[0].fn, pooled[0].fp) == (5, 0, 0)

    def test_perfect_plus_all_fp_unit_lowers_det_a(self):
        task = simple_task(2)
        preds = [det(1, box(0, 0, 10, 10), "p1"), det(2, box(0, 0, 10, 10), "p1")]
        perfect = match_unit_all_alphas(task, preds, (0.5,), range(1, 3))
        empty_task = ExpressionTask("s", "e2", "t", {})
        fps = [det(f, box(0, 0, 4, 4), "q") for f in (1, 2, 3)]
        fp_unit = match_unit_all_alphas(empty_task, fps, (0.5,), range(1, 4))
        report = finalize(accumulate([perfect, fp_unit]))
        # tp=2, fn=0, fp=3 -> DetA = 2/5
        assert report.det_a == pytest.approx(40.0)
        assert report.det_a < 100.0

    def test_mismatched_grids_rejected(self):
        with pytest.raises(ValueError):
            accumulate([[AlphaStats(alpha=0.5)], [AlphaStats(alpha=0.6)]])

    def test_permutation_invariant_bitwise(self):
        rng = np.random.default_rng(9)
        units = []
        for _ in range(12):
            n = int(rng.integers(1, 4))
            task = simple_task(n, b=box(0, 0, float(rng.integers(5, 12)), 10))
            preds = [
                det(f, box(float(rng.integers(0, 3)), 0, 10, 10), "p1")
                for f in range(1, n + 1)
            ]
            units.append(match_unit_all_alphas(task, preds, DEFAULT_ALPHA_GRID, range(1, n + 1)))
        fwd = accumulate(units)
        rev = accumulate(list(reversed(units)))
        for a, b in zip(fwd, rev):
            assert a.iou_sum == b.iou_sum
            assert a.ass_a_sum == b.ass_a_sum
            assert a.ass_re_sum == b.ass_re_sum
            assert a.ass_pr_sum == b.ass_pr_sum


class TestFinalize:
    def test_empty_evaluation_convention(self):
        report = finalize([AlphaStats(alpha=a) for a in DEFAULT_ALPHA_GRID])
        assert report.flags == ("EMPTY_EVAL",)
        assert report.hota == 100.0
        assert all(r.empty for r in report.per_alpha)

    def test_tp_zero_with_errors(self):
        report = finalize([AlphaStats(alpha=0.5, tp=0, fn=3, fp=2)])
        row = report.per_alpha[0]
        assert row.hota == 0.0 and row.ass_a == 0.0 and row.loc_a == 0.0
        assert row.det_re == 0.0 and row.det_pr == 0.0
        assert not row.empty and report.flags == ()

    def test_alpha_average(self):
        stats = [
            AlphaStats(alpha=0.3, tp=1, fn=0, fp=0, iou_sum=1.0,
                       ass_a_sum=1.0, ass_re_sum=1.0, ass_pr_sum=1.0),
            AlphaStats(alpha=0.7, tp=0, fn=1, fp=0),
        ]
        report = finalize(stats)
        assert report.det_a == pytest.approx(50.0)
        assert report.hota == pytest.approx(50.0)

    def test_requires_stats(self):
        with pytest.raises(ValueError):
            finalize([])

    def test_perfect_is_exactly_100(self):
        task = simple_task(4)
        preds = [det(f, box(0, 0, 10, 10), "p1") for f in range(1, 5)]
        report = finalize(
            [match_unit(task, preds, a, frames=range(1, 5)) for a in DEFAULT_ALPHA_GRID]
        )
        d = report.as_dict()
        for key in ("HOTA", "DetA", "AssA", "DetRe", "DetPr", "AssRe", "AssPr", "LocA"):
            assert d[key] == 100.0
