"""Core types: IoU, filtering, config validation, dataset invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmot_eval.model import (
    Attribute,
    AttributeFrameLabels,
    BoundingBox,
    Detection,
    EvalConfig,
    ExpressionTask,
    GroundTruthTrack,
    SequenceData,
    filter_predictions,
    iou,
    iou_matrix,
    validate_dataset,
)

from .conftest import box, det, track


class TestIoU:
    def test_identical_boxes(self):
        assert iou(box(0, 0, 10, 10), box(0, 0, 10, 10)) == 1.0

    def test_disjoint_boxes(self):
        assert iou(box(0, 0, 5, 5), box(100, 100, 5, 5)) == 0.0

    def test_partial_overlap_exact_third(self):
        # intersection 1x2 = 2, union 4 + 4 - 2 = 6
        assert iou(box(0, 0, 2, 2), box(1, 0, 2, 2)) == pytest.approx(2 / 6)

    def test_touching_edges_is_zero(self):
        assert iou(box(0, 0, 5, 5), box(5, 0, 5, 5)) == 0.0

    def test_degenerate_box_is_zero(self):
        assert iou(box(0, 0, 0, 0), box(0, 0, 10, 10)) == 0.0
        assert iou(box(0, 0, 0, 0), box(0, 0, 0, 0)) == 0.0

    def test_symmetry(self):
        a, b = box(0, 0, 4, 6), box(2, 1, 5, 3)
        assert iou(a, b) == iou(b, a)

    def test_range(self):
        assert 0.0 <= iou(box(0, 0, 3, 3), box(1, 1, 7, 2)) <= 1.0


coord = st.integers(min_value=0, max_value=50)
extent = st.integers(min_value=0, max_value=30)
box_strategy = st.builds(
    lambda x, y, w, h: BoundingBox(float(x), float(y), float(w), float(h)),
    coord, coord, extent, extent,
)


class TestIoUMatrix:
    @given(st.lists(box_strategy, min_size=1, max_size=5),
           st.lists(box_strategy, min_size=1, max_size=5))
    @settings(max_examples=200, deadline=None)
    def test_bit_identical_to_scalar(self, gts, preds):
        g = np.array([[b.x, b.y, b.w, b.h] for b in gts])
        p = np.array([[b.x, b.y, b.w, b.h] for b in preds])
        mat = iou_matrix(g, p)
        for i, gb in enumerate(gts):
            for j, pb in enumerate(preds):
                assert mat[i, j] == iou(gb, pb)

    def test_shape(self):
        g = np.zeros((3, 4))
        p = np.zeros((2, 4))
        assert iou_matrix(g, p).shape == (3, 2)


class TestFilterPredictions:
    def test_kept_with_defaults(self):
        d = det(1, box(0, 0, 5, 5), "t", confidence=0.6, referring_score=0.45)
        assert filter_predictions([d], EvalConfig()) == [d]

    def test_dropped_below_referring_threshold(self):
        d = det(1, box(0, 0, 5, 5), "t", confidence=0.6, referring_score=0.35)
        assert filter_predictions([d], EvalConfig()) == []

    def test_dropped_below_score_threshold(self):
        d = det(1, box(0, 0, 5, 5), "t", confidence=0.4, referring_score=0.9)
        assert filter_predictions([d], EvalConfig()) == []

    def test_vacuous_filter(self):
        dets = [
            det(1, box(0, 0, 1, 1), "a", confidence=0.01, referring_score=0.02),
            det(2, box(0, 0, 1, 1), "b", confidence=0.99, referring_score=0.99),
        ]
        cfg = EvalConfig(score_threshold=0.0, beta_ref=0.0)
        assert filter_predictions(dets, cfg) == dets

    @given(st.lists(st.tuples(
        st.floats(min_value=0, max_value=1), st.floats(min_value=0, max_value=1))),
        st.floats(min_value=0, max_value=1), st.floats(min_value=0, max_value=1))
    @settings(max_examples=100, deadline=None)
    def test_idempotent_and_order_preserving(self, scores, thr, beta):
        dets = [
            det(i + 1, box(0, 0, 1, 1), f"t{i}", confidence=c, referring_score=r)
            for i, (c, r) in enumerate(scores)
        ]
        cfg = EvalConfig(score_threshold=thr, beta_ref=beta)
        once = filter_predictions(dets, cfg)
        assert filter_predictions(once, cfg) == once
        positions = [dets.index(d) for d in once]
        assert positions == sorted(positions)


class TestEvalConfig:
    def test_default_alpha_grid(self):
        assert EvalConfig().alpha_grid == tuple(
            round(0.05 * i, 2) for i in range(1, 20)
        )
        assert len(EvalConfig().alpha_grid) == 19

    @pytest.mark.parametrize("kwargs", [
        {"score_threshold": -0.1},
        {"score_threshold": 1.5},
        {"beta_ref": 2.0},
        {"alpha_grid": ()},
        {"alpha_grid": (0.0, 0.5)},
        {"alpha_grid": (0.5, 1.0)},
        {"alpha_grid": (0.5, 0.3)},
        {"alpha_grid": (0.5, 0.5)},
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            EvalConfig(**kwargs)


class TestValidateDataset:
    def test_clean_mini_fixture(self, mini_bundle):
        assert validate_dataset(
            mini_bundle.sequences, mini_bundle.tasks, mini_bundle.attributes
        ) == []

    def test_negative_extent(self):
        seq = SequenceData("s", 5, {"t": track("t", [1], box(0, 0, -3, 4))})
        out = validate_dataset({"s": seq}, [])
        assert [v.code for v in out] == ["NEGATIVE_EXTENT"]
        assert out[0].track_id == "t"

    def test_frame_out_of_bounds(self):
        seq = SequenceData("s", 5, {"t": track("t", [7], box(0, 0, 3, 4))})
        out = validate_dataset({"s": seq}, [])
        assert [v.code for v in out] == ["FRAME_OUT_OF_BOUNDS"]

    def test_unknown_sequence(self):
        t = ExpressionTask("nope", "e", "text", {})
        out = validate_dataset({}, [t])
        assert [v.code for v in out] == ["UNKNOWN_SEQUENCE"]

    def test_day_night_conflict(self):
        seq = SequenceData("s", 1, {})
        labels = AttributeFrameLabels(
            "s", {1: frozenset({Attribute.DAY, Attribute.NIGHT})}
        )
        out = validate_dataset({"s": seq}, [], {"s": labels})
        assert [v.code for v in out] == ["ATTR_DAY_NIGHT_CONFLICT"]

    def test_attribute_coverage_gap(self):
        seq = SequenceData("s", 3, {})
        labels = AttributeFrameLabels(
            "s", {1: frozenset({Attribute.DAY}), 3: frozenset({Attribute.DAY})}
        )
        out = validate_dataset({"s": seq}, [], {"s": labels})
        assert [v.code for v in out] == ["ATTR_COVERAGE_GAP"]
        assert out[0].frame == 2

    def test_collects_all_violations(self):
        seq = SequenceData(
            "s", 2,
            {"t": GroundTruthTrack("t", {1: box(0, 0, -1, 1), 5: box(0, 0, 1, 1)})},
        )
        out = validate_dataset({"s": seq}, [ExpressionTask("x", "e", "t", {})])
        assert sorted(v.code for v in out) == [
            "FRAME_OUT_OF_BOUNDS", "NEGATIVE_EXTENT", "UNKNOWN_SEQUENCE",
        ]


class TestDomainTypes:
    def test_no_target_property(self):
        assert ExpressionTask("s", "e", "t", {}).no_target
        assert ExpressionTask("s", "e", "t", {1: {}}).no_target
        assert not ExpressionTask("s", "e", "t", {1: {"a": box(0, 0, 1, 1)}}).no_target

    def test_frames_with(self):
        labels = AttributeFrameLabels("s", {
            1: frozenset({Attribute.DAY}),
            2: frozenset({Attribute.NIGHT, Attribute.OCCLUSION}),
            3: frozenset({Attribute.DAY, Attribute.OCCLUSION}),
        })
        assert labels.frames_with(Attribute.OCCLUSION) == [2, 3]
        assert labels.frames_with(Attribute.FAST_MOTION) == []

    def test_attribute_from_name(self):
        assert Attribute.from_name("Night") is Attribute.NIGHT
        with pytest.raises(ValueError):
            Attribute.from_name("weather")

    def test_box_is_immutable(self):
        b = box(0, 0, 1, 1)
        with pytest.raises(AttributeError):
            b.x = 5.0
