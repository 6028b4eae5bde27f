"""Parsers and writers for ground truth, expressions, attributes, predictions,
and reports.

All parsers reject malformed input with file and line context instead of
repairing it silently. Line-based formats accept LF and CRLF; writers always
emit LF. Round-tripping any format preserves logical content exactly.

On-disk layout of a dataset bundle::

    bundle/
      manifest.json        sequence list with lengths and split tags
      expressions.json     expression tasks with inclusive target intervals
      <sequence_id>/gt.txt            frame,track_id,x,y,w,h
      <sequence_id>/attributes.txt    frame + eight 0/1 attribute cells

Predictions live in a separate directory, one file per (sequence,
expression) named ``<sequence_id>__<expression_id>.txt`` with lines
``frame,track_id,x,y,w,h,confidence,referring_score``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .attributes import AttributeReport
from .hota import MetricReport
from .model import (
    Attribute,
    AttributeFrameLabels,
    BoundingBox,
    Detection,
    ExpressionTask,
    GroundTruthTrack,
    SequenceData,
)
from .stats import StatsReport

ATTRIBUTE_COLUMNS: Tuple[Attribute, ...] = (
    Attribute.DAY,
    Attribute.NIGHT,
    Attribute.VIEWPOINT_CHANGE,
    Attribute.SCALE_VARIATION,
    Attribute.OCCLUSION,
    Attribute.FAST_MOTION,
    Attribute.ROTATION,
    Attribute.LOW_RESOLUTION,
)

REPORT_SCHEMA = "rmot-eval-report/1"
TABLE_COLUMNS = (
    "HOTA", "DetA", "AssA", "HOTA_S", "HOTA_M", "LocA",
    "DetRe", "DetPr", "AssRe", "AssPr",
)


class ParseError(ValueError):
    """Malformed input file; carries a machine-readable code and location."""

    def __init__(self, code: str, path: Path | str, line: Optional[int], message: str):
        self.code = code
        self.path = str(path)
        self.line = line
        loc = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{code} at {loc}: {message}")


@dataclass(frozen=True)
class DatasetBundle:
    """In-memory dataset: sequences, expression tasks, attribute labels."""

    sequences: Mapping[str, SequenceData]
    tasks: Tuple[ExpressionTask, ...]
    attributes: Mapping[str, AttributeFrameLabels]
    warnings: Tuple[str, ...] = ()


def _lines(path: Path) -> Iterable[Tuple[int, str]]:
    with path.open("r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if line:
                yield lineno, line


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def parse_gt(path: Path | str) -> Dict[str, GroundTruthTrack]:
    """Parse a ground-truth box file into tracks."""
    path = Path(path)
    boxes: Dict[str, Dict[int, BoundingBox]] = {}
    for lineno, line in _lines(path):
        fields = line.split(",")
        if lineno == 1 and fields and not _is_number(fields[0]):
            continue  # optional header
        if len(fields) != 6:
            raise ParseError(
                "LINE_FIELD_COUNT", path, lineno,
                f"expected 6 comma-separated fields, got {len(fields)}",
            )
        try:
            frame = int(fields[0])
            x, y, w, h = (float(v) for v in fields[2:6])
        except ValueError as exc:
            raise ParseError("FIELD_TYPE", path, lineno, str(exc)) from None
        if frame < 1:
            raise ParseError("FRAME_INDEX", path, lineno, f"frame must be >= 1, got {frame}")
        track_id = fields[1]
        per = boxes.setdefault(track_id, {})
        if frame in per:
            raise ParseError(
                "DUPLICATE_BOX", path, lineno,
                f"duplicate (frame, track) = ({frame}, {track_id})",
            )
        per[frame] = BoundingBox(x, y, w, h)
    return {tid: GroundTruthTrack(track_id=tid, boxes=b) for tid, b in boxes.items()}


def _fmt(v: float) -> str:
    return repr(int(v)) if float(v).is_integer() else repr(float(v))


def write_gt(tracks: Mapping[str, GroundTruthTrack], path: Path | str) -> None:
    path = Path(path)
    rows = []
    for tid in sorted(tracks):
        for frame in sorted(tracks[tid].boxes):
            b = tracks[tid].boxes[frame]
            rows.append((frame, tid, b))
    rows.sort(key=lambda r: (r[0], r[1]))
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for frame, tid, b in rows:
            fh.write(
                f"{frame},{tid},{_fmt(b.x)},{_fmt(b.y)},{_fmt(b.w)},{_fmt(b.h)}\n"
            )


def parse_attributes(path: Path | str, sequence_id: str, length: int) -> AttributeFrameLabels:
    """Parse a per-frame attribute flag table; every frame row must exist."""
    path = Path(path)
    flags: Dict[int, frozenset] = {}
    for lineno, line in _lines(path):
        fields = line.split(",")
        if lineno == 1 and fields and not _is_number(fields[0]):
            continue
        if len(fields) != 1 + len(ATTRIBUTE_COLUMNS):
            raise ParseError(
                "LINE_FIELD_COUNT", path, lineno,
                f"expected {1 + len(ATTRIBUTE_COLUMNS)} fields, got {len(fields)}",
            )
        try:
            frame = int(fields[0])
        except ValueError as exc:
            raise ParseError("FIELD_TYPE", path, lineno, str(exc)) from None
        active = set()
        for attr, cell in zip(ATTRIBUTE_COLUMNS, fields[1:]):
            if cell not in ("0", "1"):
                raise ParseError(
                    "NON_BINARY_CELL", path, lineno,
                    f"attribute cell for {attr.value} must be 0 or 1, got {cell!r}",
                )
            if cell == "1":
                active.add(attr)
        if frame in flags:
            raise ParseError("DUPLICATE_FRAME_ROW", path, lineno, f"frame {frame} repeated")
        flags[frame] = frozenset(active)
    for frame in range(1, length + 1):
        if frame not in flags:
            raise ParseError(
                "MISSING_FRAME_ROW", path, None,
                f"no attribute row for frame {frame} (sequence length {length})",
            )
    return AttributeFrameLabels(sequence_id=sequence_id, flags=flags)


def write_attributes(labels: AttributeFrameLabels, path: Path | str) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        header = ",".join(["frame"] + [a.value for a in ATTRIBUTE_COLUMNS])
        fh.write(header + "\n")
        for frame in sorted(labels.flags):
            cells = ["1" if a in labels.flags[frame] else "0" for a in ATTRIBUTE_COLUMNS]
            fh.write(",".join([str(frame)] + cells) + "\n")


def parse_predictions(path: Path | str) -> List[Detection]:
    """Parse one per-unit prediction file; an empty file is a valid empty list."""
    path = Path(path)
    out: List[Detection] = []
    seen = set()
    for lineno, line in _lines(path):
        fields = line.split(",")
        if lineno == 1 and fields and not _is_number(fields[0]):
            continue
        if len(fields) != 8:
            raise ParseError(
                "LINE_FIELD_COUNT", path, lineno,
                f"expected 8 comma-separated fields, got {len(fields)}",
            )
        try:
            frame = int(fields[0])
            x, y, w, h, conf, ref = (float(v) for v in fields[2:8])
        except ValueError as exc:
            raise ParseError("FIELD_TYPE", path, lineno, str(exc)) from None
        if frame < 1:
            raise ParseError("FRAME_INDEX", path, lineno, f"frame must be >= 1, got {frame}")
        if not (0.0 <= conf <= 1.0 and 0.0 <= ref <= 1.0):
            raise ParseError(
                "SCORE_RANGE", path, lineno,
                f"confidence/referring score outside [0, 1]: {conf}, {ref}",
            )
        key = (frame, fields[1])
        if key in seen:
            raise ParseError(
                "DUPLICATE_BOX", path, lineno,
                f"duplicate (frame, track) = ({frame}, {fields[1]})",
            )
        seen.add(key)
        out.append(
            Detection(
                frame=frame,
                box=BoundingBox(x, y, w, h),
                confidence=conf,
                referring_score=ref,
                track_id=fields[1],
            )
        )
    return out


def write_predictions(dets: Sequence[Detection], path: Path | str) -> None:
    path = Path(path)
    ordered = sorted(dets, key=lambda d: (d.frame, d.track_id))
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for d in ordered:
            b = d.box
            fh.write(
                f"{d.frame},{d.track_id},{_fmt(b.x)},{_fmt(b.y)},{_fmt(b.w)},{_fmt(b.h)},"
                f"{repr(float(d.confidence))},{repr(float(d.referring_score))}\n"
            )


def unit_filename(sequence_id: str, expression_id: str) -> str:
    return f"{sequence_id}__{expression_id}.txt"


def parse_expressions(
    path: Path | str,
    sequences: Mapping[str, SequenceData],
) -> Tuple[List[ExpressionTask], List[str]]:
    """Parse the expression document and join target intervals against gt.

    Intervals are inclusive. Frames inside an interval where the referenced
    track has no gt box are allowed but reported as warnings.
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError("JSON_SYNTAX", path, exc.lineno, exc.msg) from None
    if not isinstance(doc, list):
        raise ParseError("DOC_SHAPE", path, None, "top level must be a list of expressions")

    tasks: List[ExpressionTask] = []
    warnings: List[str] = []
    for i, entry in enumerate(doc):
        for key in ("expression_id", "sequence_id", "text", "targets"):
            if key not in entry:
                raise ParseError("DOC_FIELD", path, None, f"entry {i} missing {key!r}")
        seq_id = entry["sequence_id"]
        expr_id = entry["expression_id"]
        seq = sequences.get(seq_id)
        if seq is None:
            raise ParseError(
                "UNKNOWN_SEQUENCE", path, None,
                f"expression {expr_id} references unknown sequence {seq_id}",
            )
        targets: Dict[int, Dict[str, BoundingBox]] = {}
        for t in entry["targets"]:
            track_id = str(t["track_id"])
            start, end = int(t["start_frame"]), int(t["end_frame"])
            if start > end:
                raise ParseError(
                    "INTERVAL_ORDER", path, None,
                    f"expression {expr_id}: start_frame {start} > end_frame {end}",
                )
            track = seq.tracks.get(track_id)
            if track is None:
                raise ParseError(
                    "UNKNOWN_TRACK", path, None,
                    f"expression {expr_id} references unknown track {track_id} "
                    f"in sequence {seq_id}",
                )
            absent = 0
            for frame in range(start, end + 1):
                box = track.boxes.get(frame)
                if box is None:
                    absent += 1
                    continue
                targets.setdefault(frame, {})[track_id] = box
            if absent:
                warnings.append(
                    f"{seq_id}/{expr_id}: track {track_id} absent on {absent} "
                    f"frame(s) of interval [{start}, {end}]"
                )
        tasks.append(
            ExpressionTask(
                sequence_id=seq_id,
                expression_id=expr_id,
                text=str(entry["text"]),
                targets=targets,
            )
        )
    return tasks, warnings


def write_expressions(entries: Sequence[Mapping[str, object]], path: Path | str) -> None:
    """Write the expression document (interval form, not resolved boxes)."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(list(entries), fh, indent=2, sort_keys=True)
        fh.write("\n")


def tasks_to_intervals(tasks: Sequence[ExpressionTask]) -> List[Dict[str, object]]:
    """Convert resolved tasks back into interval entries (maximal runs)."""
    out = []
    for task in tasks:
        by_track: Dict[str, List[int]] = {}
        for frame in sorted(task.targets):
            for tid in task.targets[frame]:
                by_track.setdefault(tid, []).append(frame)
        intervals = []
        for tid in sorted(by_track):
            frames = by_track[tid]
            start = prev = frames[0]
            for f in frames[1:]:
                if f != prev + 1:
                    intervals.append({"track_id": tid, "start_frame": start, "end_frame": prev})
                    start = f
                prev = f
            intervals.append({"track_id": tid, "start_frame": start, "end_frame": prev})
        out.append(
            {
                "expression_id": task.expression_id,
                "sequence_id": task.sequence_id,
                "text": task.text,
                "targets": intervals,
            }
        )
    return out


def load_bundle(root: Path | str) -> DatasetBundle:
    """Load a dataset bundle directory (manifest, gt, expressions, attributes)."""
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ParseError("NO_MANIFEST", manifest_path, None, "manifest.json not found")
    with manifest_path.open("r", encoding="utf-8") as fh:
        manifest = json.load(fh)

    sequences: Dict[str, SequenceData] = {}
    for entry in manifest.get("sequences", []):
        seq_id = entry["sequence_id"]
        gt_path = root / seq_id / "gt.txt"
        tracks = parse_gt(gt_path) if gt_path.exists() else {}
        sequences[seq_id] = SequenceData(
            sequence_id=seq_id,
            length=int(entry["length"]),
            tracks=tracks,
            split=entry.get("split", "train"),
        )
    if not sequences:
        raise ParseError("NO_SEQUENCES", manifest_path, None, "manifest lists no sequences")

    expr_path = root / "expressions.json"
    tasks: List[ExpressionTask] = []
    warnings: List[str] = []
    if expr_path.exists():
        tasks, warnings = parse_expressions(expr_path, sequences)

    attributes: Dict[str, AttributeFrameLabels] = {}
    for seq_id, seq in sequences.items():
        attr_path = root / seq_id / "attributes.txt"
        if attr_path.exists():
            attributes[seq_id] = parse_attributes(attr_path, seq_id, seq.length)

    return DatasetBundle(
        sequences=sequences,
        tasks=tuple(tasks),
        attributes=attributes,
        warnings=tuple(warnings),
    )


def write_bundle(
    root: Path | str,
    sequences: Mapping[str, SequenceData],
    tasks: Sequence[ExpressionTask],
    attributes: Mapping[str, AttributeFrameLabels],
) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "sequences": [
            {
                "sequence_id": s.sequence_id,
                "length": s.length,
                "split": s.split,
            }
            for s in sorted(sequences.values(), key=lambda s: s.sequence_id)
        ]
    }
    with (root / "manifest.json").open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for seq in sequences.values():
        seq_dir = root / seq.sequence_id
        seq_dir.mkdir(parents=True, exist_ok=True)
        write_gt(seq.tracks, seq_dir / "gt.txt")
        labels = attributes.get(seq.sequence_id)
        if labels is not None:
            write_attributes(labels, seq_dir / "attributes.txt")
    write_expressions(tasks_to_intervals(tasks), root / "expressions.json")


def _round2(v: float) -> str:
    # display rounding: two decimals, half away from zero
    from decimal import ROUND_HALF_UP, Decimal

    return str(Decimal(repr(v)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def report_payload(
    metrics: MetricReport,
    attributes: Optional[AttributeReport] = None,
    stats: Optional[StatsReport] = None,
    config: Optional[Mapping[str, object]] = None,
) -> Dict[str, object]:
    """Build the machine-readable report structure (full precision)."""
    payload: Dict[str, object] = {"schema": REPORT_SCHEMA}
    if config:
        payload["config"] = dict(config)
    payload["metrics"] = metrics.as_dict()
    display = {
        k: _round2(v)
        for k, v in payload["metrics"].items()  # type: ignore[union-attr]
        if isinstance(v, float)
    }
    if attributes is not None:
        payload["attributes"] = attributes.as_dict()
        if attributes.hota_s is not None:
            display["HOTA_S"] = _round2(attributes.hota_s)
        if attributes.hota_m is not None:
            display["HOTA_M"] = _round2(attributes.hota_m)
    payload["display"] = display
    if stats is not None:
        payload["stats"] = stats.as_dict()
    return payload


def write_report(payload: Mapping[str, object], out_dir: Path | str) -> Tuple[Path, Path]:
    """Write the machine-readable JSON report and the human-readable table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    with json_path.open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    display = payload.get("display", {})
    table_path = out_dir / "report.txt"
    cols = [c for c in TABLE_COLUMNS if c in display]
    widths = [max(len(c), len(str(display[c]))) for c in cols]
    with table_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("  ".join(c.rjust(w) for c, w in zip(cols, widths)) + "\n")
        fh.write("  ".join(str(display[c]).rjust(w) for c, w in zip(cols, widths)) + "\n")
    return json_path, table_path


def read_report(path: Path | str) -> Dict[str, object]:
    with Path(path).open("r", encoding="utf-8") as fh:
        return json.load(fh)
