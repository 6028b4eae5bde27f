"""Evaluation orchestration: unit partitioning, parallel matching, reduction.

Work is partitioned per expression unit. Units are dispatched to a fork-based
worker pool and reduced in the fixed unit order, so the result is identical
for any worker count. Workers inherit the evaluation context through fork
(no per-unit pickling of inputs); only the small per-alpha tallies travel
back.
"""

from __future__ import annotations

import multiprocessing
import os
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .assignment import solve_max_weight
from .attributes import AttributeReport, compose_report, restrict_to_attribute
from .hota import (
    AlphaStats,
    MetricReport,
    Solver,
    accumulate,
    finalize,
    match_unit_all_alphas,
)
from .io_formats import DatasetBundle
from .model import Attribute, Detection, EvalConfig, filter_predictions

WORKERS_ENV = "RMOT_EVAL_WORKERS"

# fork-inherited evaluation context; set in the parent right before the pool
# is created, read-only in workers
_CTX: Optional[dict] = None


def resolve_workers(workers: Optional[int]) -> int:
    if workers is not None:
        return max(int(workers), 1)
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(int(env), 1)
    return 1


def _strip(stats: Sequence[AlphaStats]) -> List[AlphaStats]:
    # drop per-pair detail before IPC; pooling only needs the sums
    for s in stats:
        s.pair_tpa = None
        s.gt_frame_counts = None
        s.pred_frame_counts = None
    return list(stats)


def _eval_unit(index: int):
    assert _CTX is not None
    task, dets = _CTX["units"][index]
    cfg: EvalConfig = _CTX["cfg"]
    solver: Solver = _CTX["solver"]
    seq = _CTX["sequences"][task.sequence_id]
    frames = range(1, seq.length + 1)
    main = _strip(match_unit_all_alphas(task, dets, cfg.alpha_grid, frames, solver=solver))

    per_attr: Dict[str, Optional[List[AlphaStats]]] = {}
    labels = _CTX["labels"].get(task.sequence_id) if _CTX["with_attributes"] else None
    if labels is not None:
        for attr in Attribute:
            attr_frames = labels.frames_with(attr)
            if not attr_frames:
                per_attr[attr.value] = None
                continue
            sub_task, sub_dets = restrict_to_attribute(task, dets, labels, attr)
            per_attr[attr.value] = _strip(
                match_unit_all_alphas(
                    sub_task, sub_dets, cfg.alpha_grid, attr_frames, solver=solver
                )
            )
    return main, per_attr


def _empty_pool(cfg: EvalConfig) -> List[AlphaStats]:
    return [AlphaStats(alpha=a) for a in cfg.alpha_grid]


def _macro_average(reports: Sequence[MetricReport], cfg: EvalConfig) -> MetricReport:
    import math

    from .hota import AlphaMetrics

    n = len(reports)

    def mean(vals: Sequence[float]) -> float:
        return math.fsum(vals) / n

    per_alpha = []
    for i, alpha in enumerate(cfg.alpha_grid):
        rows = [r.per_alpha[i] for r in reports]
        per_alpha.append(
            AlphaMetrics(
                alpha=alpha,
                tp=sum(r.tp for r in rows),
                fn=sum(r.fn for r in rows),
                fp=sum(r.fp for r in rows),
                hota=mean([r.hota for r in rows]),
                det_a=mean([r.det_a for r in rows]),
                ass_a=mean([r.ass_a for r in rows]),
                det_re=mean([r.det_re for r in rows]),
                det_pr=mean([r.det_pr for r in rows]),
                ass_re=mean([r.ass_re for r in rows]),
                ass_pr=mean([r.ass_pr for r in rows]),
                loc_a=mean([r.loc_a for r in rows]),
                empty=all(r.empty for r in rows),
            )
        )
    return MetricReport(
        hota=mean([r.hota for r in reports]),
        det_a=mean([r.det_a for r in reports]),
        ass_a=mean([r.ass_a for r in reports]),
        det_re=mean([r.det_re for r in reports]),
        det_pr=mean([r.det_pr for r in reports]),
        ass_re=mean([r.ass_re for r in reports]),
        ass_pr=mean([r.ass_pr for r in reports]),
        loc_a=mean([r.loc_a for r in reports]),
        per_alpha=tuple(per_alpha),
        flags=("MACRO_AGGREGATION",),
    )


def evaluate(
    bundle: DatasetBundle,
    predictions: Mapping[Tuple[str, str], Sequence[Detection]],
    cfg: EvalConfig,
    workers: Optional[int] = None,
    macro: bool = False,
    solver: Solver = solve_max_weight,
    with_attributes: bool = True,
) -> Tuple[MetricReport, Optional[AttributeReport]]:
    """Filter, match, accumulate, and finalize a full evaluation run.

    ``predictions`` maps (sequence_id, expression_id) to raw detections;
    units without an entry are evaluated against empty output. The attribute
    report is produced only when attribute labels exist (and
    ``with_attributes`` is set).
    """
    global _CTX
    n_workers = resolve_workers(workers)
    use_attrs = with_attributes and bool(bundle.attributes)

    units = []
    for task in bundle.tasks:
        dets = filter_predictions(
            list(predictions.get((task.sequence_id, task.expression_id), ())), cfg
        )
        units.append((task, dets))

    ctx = {
        "units": units,
        "cfg": cfg,
        "solver": solver,
        "sequences": bundle.sequences,
        "labels": bundle.attributes if use_attrs else {},
        "with_attributes": use_attrs,
    }

    _CTX = ctx
    try:
        if n_workers == 1 or len(units) <= 1:
            results = [_eval_unit(i) for i in range(len(units))]
        else:
            mp = multiprocessing.get_context("fork")
            chunk = max(len(units) // (n_workers * 4), 1)
            with mp.Pool(processes=n_workers) as pool:
                results = pool.map(_eval_unit, range(len(units)), chunksize=chunk)
    finally:
        _CTX = None

    main_stats = [r[0] for r in results]
    if macro:
        unit_reports = [
            finalize(stats) if stats else finalize(_empty_pool(cfg)) for stats in main_stats
        ]
        if not unit_reports:
            report = finalize(_empty_pool(cfg))
        else:
            report = _macro_average(unit_reports, cfg)
    else:
        pooled = accumulate(main_stats) if main_stats else _empty_pool(cfg)
        report = finalize(pooled)

    attr_report: Optional[AttributeReport] = None
    if use_attrs:
        per_attr_value: Dict[str, Optional[float]] = {}
        frame_counts = {
            attr.value: sum(
                len(lab.frames_with(attr)) for lab in bundle.attributes.values()
            )
            for attr in Attribute
        }
        for attr in Attribute:
            stacks = [
                r[1][attr.value]
                for r in results
                if r[1].get(attr.value) is not None
            ]
            if not stacks:
                per_attr_value[attr.value] = None
                continue
            per_attr_value[attr.value] = finalize(accumulate(stacks)).hota
        attr_report = compose_report(per_attr_value, frame_counts, cfg)

    return report, attr_report
