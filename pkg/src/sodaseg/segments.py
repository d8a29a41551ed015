"""Segment types, interval IoU and cost-matrix construction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np


class AnnotationError(ValueError):
    """Raised when an annotation violates a segment or video invariant."""


@dataclass(frozen=True)
class Segment:
    """A closed time interval ``[start, end]`` in seconds."""

    start: float
    end: float
    summary: Optional[str] = None
    confidence: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise AnnotationError(f"segment bounds must be finite, got [{self.start}, {self.end}]")
        if self.start < 0:
            raise AnnotationError(f"segment start must be >= 0, got {self.start}")
        if self.end <= self.start:
            raise AnnotationError(f"segment must have positive duration, got [{self.start}, {self.end}]")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise AnnotationError(f"confidence must lie in [0, 1], got {self.confidence}")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class VideoAnnotation:
    """Ordered segment list of one video.

    Ground-truth annotations must be sorted and non-overlapping; pass
    ``ground_truth=False`` for predictions, which may overlap.
    """

    video_id: str
    duration: float
    segments: tuple[Segment, ...] = field(default_factory=tuple)
    ground_truth: bool = True

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise AnnotationError(f"video {self.video_id!r}: duration must be > 0, got {self.duration}")
        for k, seg in enumerate(self.segments):
            if seg.end > self.duration:
                raise AnnotationError(
                    f"video {self.video_id!r}: segment {k} [{seg.start}, {seg.end}] "
                    f"exceeds duration {self.duration}"
                )
        if self.ground_truth:
            for k in range(1, len(self.segments)):
                prev, cur = self.segments[k - 1], self.segments[k]
                if cur.start < prev.start:
                    raise AnnotationError(f"video {self.video_id!r}: segments not sorted at index {k}")
                if cur.start < prev.end:
                    raise AnnotationError(
                        f"video {self.video_id!r}: segments {k - 1} and {k} overlap "
                        f"([{prev.start}, {prev.end}] vs [{cur.start}, {cur.end}])"
                    )

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def bounds(self) -> np.ndarray:
        """``(k, 2)`` array of start/end times."""
        if not self.segments:
            return np.zeros((0, 2))
        return np.array([[s.start, s.end] for s in self.segments], dtype=float)


def iou(a: Segment, b: Segment) -> float:
    """Temporal intersection-over-union of two segments."""
    inter = min(a.end, b.end) - max(a.start, b.start)
    if inter <= 0:
        return 0.0
    union = (a.end - a.start) + (b.end - b.start) - inter
    return inter / union


def pairwise_iou(gt_bounds: np.ndarray, pred_bounds: np.ndarray) -> np.ndarray:
    """Vectorised IoU between ``(m, 2)`` and ``(n, 2)`` boundary arrays."""
    gt_bounds = np.asarray(gt_bounds, dtype=float).reshape(-1, 2)
    pred_bounds = np.asarray(pred_bounds, dtype=float).reshape(-1, 2)
    gs, ge = gt_bounds[:, 0:1], gt_bounds[:, 1:2]
    ps, pe = pred_bounds[:, 0], pred_bounds[:, 1]
    inter = np.clip(np.minimum(ge, pe) - np.maximum(gs, ps), 0.0, None)
    union = (ge - gs) + (pe - ps) - inter
    return np.where(inter > 0, inter / np.where(union > 0, union, 1.0), 0.0)


def build_cost_matrix(gt: VideoAnnotation, pred: VideoAnnotation) -> np.ndarray:
    """``(m, n)`` matrix whose entry ``(i, j)`` is ``iou(gt[i], pred[j])``."""
    if len(gt) == 0:
        raise AnnotationError(f"video {gt.video_id!r}: no reference segments")
    if len(pred) == 0:
        return np.zeros((len(gt), 0))
    out = np.empty((len(gt), len(pred)))
    for i, g in enumerate(gt.segments):
        for j, p in enumerate(pred.segments):
            out[i, j] = iou(g, p)
    return out


def sort_segments(segments: Sequence[Segment]) -> list[Segment]:
    """Sort by start, then end, then input position (stable)."""
    order = sorted(range(len(segments)), key=lambda k: (segments[k].start, segments[k].end, k))
    return [segments[k] for k in order]


def select_top_n(segments: Sequence[Segment], n: int) -> list[Segment]:
    """Keep the ``n`` most confident segments.

    Segments without a confidence rank last; ties keep input order.
    """
    if n < 1:
        raise ValueError(f"top_n must be >= 1, got {n}")
    ranked = sorted(
        range(len(segments)),
        key=lambda k: (-(segments[k].confidence if segments[k].confidence is not None else -1.0), k),
    )
    return [segments[k] for k in ranked[:n]]


def normalize_predictions(pred: VideoAnnotation, top_n: Optional[int] = None) -> VideoAnnotation:
    """Optional top-N confidence selection followed by temporal sorting."""
    segs = list(pred.segments)
    if top_n is not None:
        segs = select_top_n(segs, top_n)
    return replace(pred, segments=tuple(sort_segments(segs)), ground_truth=False)
