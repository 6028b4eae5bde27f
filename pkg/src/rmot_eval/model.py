"""Core domain types: boxes, detections, tracks, expression tasks, attribute labels.

All types are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

DEFAULT_ALPHA_GRID: Tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(1, 20))


class Attribute(enum.Enum):
    """Per-frame challenge attributes annotated on test sequences."""

    DAY = "day"
    NIGHT = "night"
    VIEWPOINT_CHANGE = "viewpoint_change"
    SCALE_VARIATION = "scale_variation"
    OCCLUSION = "occlusion"
    FAST_MOTION = "fast_motion"
    ROTATION = "rotation"
    LOW_RESOLUTION = "low_resolution"

    @classmethod
    def from_name(cls, name: str) -> "Attribute":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown attribute: {name!r}") from None


SCENE_ATTRIBUTES: Tuple[Attribute, ...] = (
    Attribute.NIGHT,
    Attribute.OCCLUSION,
    Attribute.LOW_RESOLUTION,
)
MOTION_ATTRIBUTES: Tuple[Attribute, ...] = (
    Attribute.VIEWPOINT_CHANGE,
    Attribute.SCALE_VARIATION,
    Attribute.FAST_MOTION,
    Attribute.ROTATION,
)


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned pixel box, (x, y) is the top-left corner."""

    x: float
    y: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True, slots=True)
class Detection:
    """One predicted box with its tracker identity and scores."""

    frame: int
    box: BoundingBox
    confidence: float
    referring_score: float
    track_id: str


@dataclass(frozen=True)
class GroundTruthTrack:
    """One annotated trajectory: at most one box per frame."""

    track_id: str
    boxes: Mapping[int, BoundingBox]


@dataclass(frozen=True)
class ExpressionTask:
    """One (sequence, expression) evaluation unit.

    ``targets`` maps frame -> {track_id -> box}. A task with no targets on any
    frame is a no-target expression; the correct prediction is empty output.
    """

    sequence_id: str
    expression_id: str
    text: str
    targets: Mapping[int, Mapping[str, BoundingBox]]

    @property
    def no_target(self) -> bool:
        return not any(self.targets.values())


@dataclass(frozen=True)
class AttributeFrameLabels:
    """Per-frame attribute flags covering every frame of a sequence."""

    sequence_id: str
    flags: Mapping[int, frozenset]  # frame -> frozenset[Attribute]

    def frames_with(self, attr: Attribute) -> List[int]:
        return sorted(f for f, s in self.flags.items() if attr in s)


@dataclass(frozen=True)
class EvalConfig:
    """Thresholds and grids driving an evaluation run."""

    score_threshold: float = 0.5
    beta_ref: float = 0.4
    alpha_grid: Tuple[float, ...] = DEFAULT_ALPHA_GRID
    scene_attributes: Tuple[Attribute, ...] = SCENE_ATTRIBUTES
    motion_attributes: Tuple[Attribute, ...] = MOTION_ATTRIBUTES

    def __post_init__(self) -> None:
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must lie in [0, 1]")
        if not 0.0 <= self.beta_ref <= 1.0:
            raise ValueError("beta_ref must lie in [0, 1]")
        if not self.alpha_grid:
            raise ValueError("alpha_grid must be non-empty")
        if any(not 0.0 < a < 1.0 for a in self.alpha_grid):
            raise ValueError("alpha values must lie in (0, 1)")
        if any(b <= a for a, b in zip(self.alpha_grid, self.alpha_grid[1:])):
            raise ValueError("alpha_grid must be strictly increasing")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0.0 when the union is empty.

    Degenerate (zero-extent) boxes yield 0 by convention, so they can never
    become true positives.
    """
    ix = max(a.x, b.x)
    iy = max(a.y, b.y)
    ix2 = min(a.x + a.w, b.x + b.w)
    iy2 = min(a.y + a.h, b.y + b.h)
    iw = ix2 - ix
    ih = iy2 - iy
    if iw <= 0.0 or ih <= 0.0:
        inter = 0.0
    else:
        inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def iou_matrix(gt: np.ndarray, pred: np.ndarray) -> np.ndarray:
    """Pairwise IoU between two (n, 4) arrays of [x, y, w, h] boxes.

    Bit-identical to looping :func:`iou` over all pairs; the engine relies on
    this to keep the vectorized fast path and the scalar definition in sync.
    """
    gx, gy, gw, gh = (gt[:, None, i] for i in range(4))
    px, py, pw, ph = (pred[None, :, i] for i in range(4))
    iw = np.minimum(gx + gw, px + pw) - np.maximum(gx, px)
    ih = np.minimum(gy + gh, py + ph) - np.maximum(gy, py)
    inter = np.where((iw > 0.0) & (ih > 0.0), iw * ih, 0.0)
    union = gw * gh + pw * ph - inter
    out = np.zeros(inter.shape, dtype=np.float64)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def filter_predictions(dets: Sequence[Detection], cfg: EvalConfig) -> List[Detection]:
    """Keep detections passing both the class-score and referring thresholds.

    Relative order is preserved; the filter is idempotent and monotone in
    both thresholds.
    """
    return [
        d
        for d in dets
        if d.confidence >= cfg.score_threshold and d.referring_score >= cfg.beta_ref
    ]


@dataclass(frozen=True)
class Violation:
    """One dataset-invariant breach, located as precisely as the data allows."""

    code: str
    sequence_id: str
    message: str
    expression_id: Optional[str] = None
    frame: Optional[int] = None
    track_id: Optional[str] = None

    def as_dict(self) -> Dict[str, object]:
        return {
            "code": self.code,
            "sequence_id": self.sequence_id,
            "expression_id": self.expression_id,
            "frame": self.frame,
            "track_id": self.track_id,
            "message": self.message,
        }


@dataclass(frozen=True)
class SequenceData:
    """Ground truth for one video sequence."""

    sequence_id: str
    length: int
    tracks: Mapping[str, GroundTruthTrack]
    split: str = "train"


def validate_dataset(
    sequences: Mapping[str, SequenceData],
    expressions: Iterable[ExpressionTask],
    attributes: Mapping[str, AttributeFrameLabels] | None = None,
) -> List[Violation]:
    """Check every type invariant, collecting violations exhaustively.

    Returns an empty list iff the dataset is clean. Violations are data, not
    failures: callers decide whether to abort.
    """
    out: List[Violation] = []

    for seq in sequences.values():
        for track in seq.tracks.values():
            for frame, box in track.boxes.items():
                if box.w < 0 or box.h < 0:
                    out.append(
                        Violation(
                            "NEGATIVE_EXTENT",
                            seq.sequence_id,
                            f"box has negative extent w={box.w} h={box.h}",
                            frame=frame,
                            track_id=track.track_id,
                        )
                    )
                if not 1 <= frame <= seq.length:
                    out.append(
                        Violation(
                            "FRAME_OUT_OF_BOUNDS",
                            seq.sequence_id,
                            f"frame {frame} outside [1, {seq.length}]",
                            frame=frame,
                            track_id=track.track_id,
                        )
                    )

    for task in expressions:
        seq = sequences.get(task.sequence_id)
        if seq is None:
            out.append(
                Violation(
                    "UNKNOWN_SEQUENCE",
                    task.sequence_id,
                    f"expression {task.expression_id} references unknown sequence",
                    expression_id=task.expression_id,
                )
            )
            continue
        has_any = False
        for frame, by_track in task.targets.items():
            if by_track:
                has_any = True
            if not 1 <= frame <= seq.length:
                out.append(
                    Violation(
                        "FRAME_OUT_OF_BOUNDS",
                        task.sequence_id,
                        f"target frame {frame} outside [1, {seq.length}]",
                        expression_id=task.expression_id,
                        frame=frame,
                    )
                )
            for track_id, box in by_track.items():
                if box.w < 0 or box.h < 0:
                    out.append(
                        Violation(
                            "NEGATIVE_EXTENT",
                            task.sequence_id,
                            f"target box has negative extent w={box.w} h={box.h}",
                            expression_id=task.expression_id,
                            frame=frame,
                            track_id=track_id,
                        )
                    )
        if task.no_target and has_any:
            # unreachable with the derived no_target property; kept for parsed
            # documents that carry an explicit flag
            out.append(
                Violation(
                    "NO_TARGET_INCONSISTENT",
                    task.sequence_id,
                    "no-target expression has target boxes",
                    expression_id=task.expression_id,
                )
            )

    for seq_id, labels in (attributes or {}).items():
        seq = sequences.get(seq_id)
        if seq is not None:
            missing = [f for f in range(1, seq.length + 1) if f not in labels.flags]
            if missing:
                out.append(
                    Violation(
                        "ATTR_COVERAGE_GAP",
                        seq_id,
                        f"attribute labels missing for {len(missing)} frame(s), "
                        f"first at frame {missing[0]}",
                        frame=missing[0],
                    )
                )
        for frame, flags in labels.flags.items():
            if Attribute.DAY in flags and Attribute.NIGHT in flags:
                out.append(
                    Violation(
                        "ATTR_DAY_NIGHT_CONFLICT",
                        seq_id,
                        "frame flagged both day and night",
                        frame=frame,
                    )
                )

    return out
