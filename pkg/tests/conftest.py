"""Shared fixtures: the hand-counted mini dataset and small builders."""

from __future__ import annotations

from typing import Dict, List, Mapping, Sequence, Tuple

import pytest

from rmot_eval.io_formats import DatasetBundle
from rmot_eval.model import (
    Attribute,
    AttributeFrameLabels,
    BoundingBox,
    Detection,
    ExpressionTask,
    GroundTruthTrack,
    SequenceData,
)


def box(x: float, y: float, w: float, h: float) -> BoundingBox:
    return BoundingBox(x, y, w, h)


def det(
    frame: int,
    b: BoundingBox,
    track_id: str,
    confidence: float = 1.0,
    referring_score: float = 1.0,
) -> Detection:
    return Detection(
        frame=frame,
        box=b,
        confidence=confidence,
        referring_score=referring_score,
        track_id=track_id,
    )


def track(track_id: str, frames: Sequence[int], b: BoundingBox) -> GroundTruthTrack:
    return GroundTruthTrack(track_id=track_id, boxes={f: b for f in frames})


def task_from_tracks(
    sequence_id: str,
    expression_id: str,
    text: str,
    parts: Sequence[Tuple[GroundTruthTrack, Sequence[int]]],
) -> ExpressionTask:
    targets: Dict[int, Dict[str, BoundingBox]] = {}
    for tr, frames in parts:
        for f in frames:
            targets.setdefault(f, {})[tr.track_id] = tr.boxes[f]
    return ExpressionTask(
        sequence_id=sequence_id,
        expression_id=expression_id,
        text=text,
        targets=targets,
    )


def perfect_predictions(task: ExpressionTask) -> List[Detection]:
    return [
        det(f, b, tid)
        for f in sorted(task.targets)
        for tid, b in sorted(task.targets[f].items())
    ]


def build_mini_bundle() -> DatasetBundle:
    """Three sequences with hand-counted statistics (see test_stats)."""
    a1 = track("a1", range(1, 11), box(0, 0, 10, 10))
    a2 = track("a2", range(3, 8), box(100, 100, 20, 20))
    b1 = track("b1", range(1, 21), box(50, 50, 30, 30))
    b2 = track("b2", range(5, 9), box(200, 200, 40, 40))
    c1 = track("c1", range(1, 6), box(10, 10, 5, 5))

    sequences = {
        "seq-a": SequenceData("seq-a", 10, {"a1": a1, "a2": a2}, split="train"),
        "seq-b": SequenceData("seq-b", 20, {"b1": b1, "b2": b2}, split="train"),
        "seq-c": SequenceData("seq-c", 5, {"c1": c1}, split="in-domain-test"),
    }
    tasks = (
        task_from_tracks("seq-a", "e1", "the red car", [(a1, range(1, 11))]),
        task_from_tracks("seq-a", "e2", "the  red car", [(a2, range(3, 8))]),
        task_from_tracks(
            "seq-b", "e1", "two people walking", [(b1, range(1, 11)), (b2, range(5, 9))]
        ),
        task_from_tracks("seq-c", "e1", "no such object!", []),
    )

    flags: Dict[int, frozenset] = {}
    for f in range(1, 11):
        active = {Attribute.DAY if f <= 5 else Attribute.NIGHT}
        if f in (3, 4):
            active.add(Attribute.OCCLUSION)
        if f == 6:
            active.add(Attribute.LOW_RESOLUTION)
        if f == 1:
            active.add(Attribute.VIEWPOINT_CHANGE)
        if f == 2:
            active.add(Attribute.SCALE_VARIATION)
        if f == 7:
            active.add(Attribute.FAST_MOTION)
        if f == 8:
            active.add(Attribute.ROTATION)
        flags[f] = frozenset(active)
    attributes = {"seq-a": AttributeFrameLabels(sequence_id="seq-a", flags=flags)}

    return DatasetBundle(
        sequences=sequences, tasks=tasks, attributes=attributes, warnings=()
    )


@pytest.fixture
def mini_bundle() -> DatasetBundle:
    return build_mini_bundle()


@pytest.fixture
def mini_predictions(mini_bundle) -> Dict[Tuple[str, str], List[Detection]]:
    return {
        (t.sequence_id, t.expression_id): perfect_predictions(t)
        for t in mini_bundle.tasks
    }
