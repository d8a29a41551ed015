"""JSON annotation and report files.

Annotation document::

    {"videos": [{"id": str, "duration": float,
                 "segments": [{"start": float, "end": float,
                               "summary": str?, "confidence": float?}]}]}

Report document::

    {"per_video": [{"id": str, <metric>: float, ...}],
     "aggregate": {<metric>: float}}

Report metrics are on a 0-100 scale rounded to two decimals.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping

from .segments import AnnotationError, Segment, VideoAnnotation


class SchemaError(AnnotationError):
    """Annotation file does not match the expected document layout."""


def _number(value: Any, video_id: str, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"video {video_id!r}: field {where!r} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise SchemaError(f"video {video_id!r}: field {where!r} must be finite, got {value!r}")
    return float(value)


def _parse_segment(raw: Any, video_id: str, k: int) -> Segment:
    where = f"segments[{k}]"
    if not isinstance(raw, Mapping):
        raise SchemaError(f"video {video_id!r}: field {where!r} must be an object")
    for key in ("start", "end"):
        if key not in raw:
            raise SchemaError(f"video {video_id!r}: field '{where}.{key}' is missing")
    start = _number(raw["start"], video_id, f"{where}.start")
    end = _number(raw["end"], video_id, f"{where}.end")
    summary = raw.get("summary")
    if summary is not None and not isinstance(summary, str):
        raise SchemaError(f"video {video_id!r}: field '{where}.summary' must be a string")
    confidence = raw.get("confidence")
    if confidence is not None:
        confidence = _number(confidence, video_id, f"{where}.confidence")
    try:
        return Segment(start, end, summary, confidence)
    except AnnotationError as exc:
        raise SchemaError(f"video {video_id!r}: field {where!r}: {exc}") from None


def parse_annotations(doc: Any, ground_truth: bool = True) -> list[VideoAnnotation]:
    """Validate a decoded annotation document and build annotations."""
    if not isinstance(doc, Mapping) or not isinstance(doc.get("videos"), list):
        raise SchemaError("document must be an object with a 'videos' list")
    videos = []
    seen = set()
    for idx, raw in enumerate(doc["videos"]):
        if not isinstance(raw, Mapping):
            raise SchemaError(f"videos[{idx}] must be an object")
        video_id = raw.get("id")
        if not isinstance(video_id, str):
            raise SchemaError(f"videos[{idx}]: field 'id' must be a string, got {video_id!r}")
        if video_id in seen:
            raise SchemaError(f"video {video_id!r}: field 'id' is duplicated")
        seen.add(video_id)
        if "duration" not in raw:
            raise SchemaError(f"video {video_id!r}: field 'duration' is missing")
        duration = _number(raw["duration"], video_id, "duration")
        segs = raw.get("segments")
        if not isinstance(segs, list):
            raise SchemaError(f"video {video_id!r}: field 'segments' must be a list")
        segments = [_parse_segment(s, video_id, k) for k, s in enumerate(segs)]
        try:
            videos.append(VideoAnnotation(video_id, duration, tuple(segments), ground_truth=ground_truth))
        except AnnotationError as exc:
            raise SchemaError(str(exc)) from None
    return videos


def load_annotations(path, ground_truth: bool = True) -> list[VideoAnnotation]:
    """Read an annotation file.

    Ground-truth files are checked for sorted, non-overlapping segments;
    prediction files (``ground_truth=False``) are not.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return parse_annotations(doc, ground_truth=ground_truth)


def annotations_to_doc(videos: Iterable[VideoAnnotation]) -> dict:
    out = []
    for v in videos:
        segs = []
        for s in v.segments:
            item: dict[str, Any] = {"start": s.start, "end": s.end}
            if s.summary is not None:
                item["summary"] = s.summary
            if s.confidence is not None:
                item["confidence"] = s.confidence
            segs.append(item)
        out.append({"id": v.video_id, "duration": v.duration, "segments": segs})
    return {"videos": out}


def save_annotations(path, videos: Iterable[VideoAnnotation]) -> None:
    Path(path).write_text(json.dumps(annotations_to_doc(videos), indent=1) + "\n", encoding="utf-8")


def to_percent(value: float) -> float:
    """Map a [0, 1] score onto the 0-100 reporting scale (two decimals)."""
    return round(100.0 * value, 2)


def save_report(path, report: Mapping[str, Any]) -> None:
    """Write a report document; keys inside each record are kept as given."""
    if "per_video" not in report or "aggregate" not in report:
        raise SchemaError("report must contain 'per_video' and 'aggregate'")
    Path(path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, Mapping) or "per_video" not in doc or "aggregate" not in doc:
        raise SchemaError(f"{path}: report must contain 'per_video' and 'aggregate'")
    return dict(doc)
