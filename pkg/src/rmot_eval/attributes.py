"""Attribute-conditioned HOTA and the geometric-mean composites.

Each attribute evaluation restricts every expression unit to the frames
carrying that attribute and runs the full HOTA pipeline on the restriction,
so it is a self-contained HOTA problem. Composites take the geometric mean
of the unrounded per-attribute scores; attributes absent from the whole
evaluation are excluded with the effective count reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .assignment import solve_max_weight
from .hota import Solver, accumulate, finalize, match_unit_all_alphas
from .model import (
    Attribute,
    AttributeFrameLabels,
    Detection,
    EvalConfig,
    ExpressionTask,
    SequenceData,
    filter_predictions,
)


@dataclass(frozen=True)
class AttributeReport:
    """Per-attribute HOTA values plus the scene/motion composites.

    ``per_attribute`` holds None for attributes with no flagged frame anywhere
    in the evaluation; those are excluded from the composites and surfaced in
    ``warnings``.
    """

    per_attribute: Mapping[str, Optional[float]]
    frame_counts: Mapping[str, int]
    hota_s: Optional[float]
    hota_m: Optional[float]
    n_s_effective: int
    n_m_effective: int
    warnings: Tuple[str, ...] = ()

    def as_dict(self) -> Dict[str, object]:
        return {
            "per_attribute": dict(self.per_attribute),
            "frame_counts": dict(self.frame_counts),
            "HOTA_S": self.hota_s,
            "HOTA_M": self.hota_m,
            "n_s_effective": self.n_s_effective,
            "n_m_effective": self.n_m_effective,
            "warnings": list(self.warnings),
        }


def restrict_to_attribute(
    task: ExpressionTask,
    preds: Sequence[Detection],
    labels: AttributeFrameLabels,
    attr: Attribute,
) -> Tuple[ExpressionTask, List[Detection]]:
    """Keep only the frames where ``attr`` is set; frame indices are preserved."""
    if not isinstance(attr, Attribute):
        attr = Attribute.from_name(str(attr))
    keep = {f for f, flags in labels.flags.items() if attr in flags}
    sub_task = ExpressionTask(
        sequence_id=task.sequence_id,
        expression_id=task.expression_id,
        text=task.text,
        targets={f: t for f, t in task.targets.items() if f in keep},
    )
    sub_preds = [d for d in preds if d.frame in keep]
    return sub_task, sub_preds


def attribute_hota(
    sequences: Mapping[str, SequenceData],
    tasks: Sequence[ExpressionTask],
    predictions: Mapping[Tuple[str, str], Sequence[Detection]],
    labels: Mapping[str, AttributeFrameLabels],
    attr: Attribute,
    cfg: EvalConfig,
    solver: Solver = solve_max_weight,
    prefiltered: bool = False,
) -> Optional[float]:
    """Full pipeline over attribute-restricted units; None if attr is absent.

    ``predictions`` maps (sequence_id, expression_id) to raw detections;
    missing units are treated as empty output.
    """
    per_unit = []
    any_frames = False
    for task in tasks:
        seq_labels = labels.get(task.sequence_id)
        if seq_labels is None:
            continue
        frames = seq_labels.frames_with(attr)
        if not frames:
            continue
        any_frames = True
        dets = list(predictions.get((task.sequence_id, task.expression_id), ()))
        if not prefiltered:
            dets = filter_predictions(dets, cfg)
        sub_task, sub_preds = restrict_to_attribute(task, dets, seq_labels, attr)
        per_unit.append(
            match_unit_all_alphas(sub_task, sub_preds, cfg.alpha_grid, frames, solver=solver)
        )
    if not any_frames:
        return None
    return finalize(accumulate(per_unit)).hota


def compose_geometric(values: Sequence[float]) -> float:
    """N-th root of the product of N percentage scores.

    Permutation-invariant, lies in [min, max] of its inputs, and any zero
    input collapses the composite to zero.
    """
    if not values:
        raise ValueError("cannot compose an empty list of scores")
    for v in values:
        if not 0.0 <= v <= 100.0:
            raise ValueError(f"scores must lie in [0, 100], got {v}")
    if any(v == 0.0 for v in values):
        return 0.0
    if all(v == values[0] for v in values):
        return values[0]
    result = math.exp(math.fsum(math.log(v) for v in values) / len(values))
    # guard against float drift outside the input hull
    return min(max(result, min(values)), max(values))


def compose_report(
    per_attr: Mapping[str, Optional[float]],
    frame_counts: Mapping[str, int],
    cfg: EvalConfig,
) -> AttributeReport:
    """Assemble the attribute report from unrounded per-attribute HOTA values."""
    warnings: List[str] = [
        f"attribute {name} absent from evaluation"
        for name, value in per_attr.items()
        if value is None
    ]

    def compose(members: Sequence[Attribute]) -> Tuple[Optional[float], int]:
        present = [per_attr[a.value] for a in members if per_attr.get(a.value) is not None]
        if not present:
            return None, 0
        return compose_geometric(present), len(present)

    hota_s, n_s = compose(cfg.scene_attributes)
    hota_m, n_m = compose(cfg.motion_attributes)
    if n_s != len(cfg.scene_attributes) and n_s > 0:
        warnings.append(f"HOTA_S composed from {n_s} of {len(cfg.scene_attributes)} attributes")
    if n_m != len(cfg.motion_attributes) and n_m > 0:
        warnings.append(f"HOTA_M composed from {n_m} of {len(cfg.motion_attributes)} attributes")
    return AttributeReport(
        per_attribute=dict(per_attr),
        frame_counts=dict(frame_counts),
        hota_s=hota_s,
        hota_m=hota_m,
        n_s_effective=n_s,
        n_m_effective=n_m,
        warnings=tuple(warnings),
    )


def build_attribute_report(
    sequences: Mapping[str, SequenceData],
    tasks: Sequence[ExpressionTask],
    predictions: Mapping[Tuple[str, str], Sequence[Detection]],
    labels: Mapping[str, AttributeFrameLabels],
    cfg: EvalConfig,
    solver: Solver = solve_max_weight,
    prefiltered: bool = False,
) -> AttributeReport:
    """Evaluate all eight attributes and compose HOTA_S / HOTA_M."""
    per_attr: Dict[str, Optional[float]] = {}
    frame_counts: Dict[str, int] = {}
    for attr in Attribute:
        frame_counts[attr.value] = sum(
            len(lab.frames_with(attr)) for lab in labels.values()
        )
        per_attr[attr.value] = attribute_hota(
            sequences, tasks, predictions, labels, attr, cfg,
            solver=solver, prefiltered=prefiltered,
        )
    return compose_report(per_attr, frame_counts, cfg)
