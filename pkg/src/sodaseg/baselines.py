"""Uniform segmentation baselines built from dataset statistics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .segments import Segment, VideoAnnotation


class BaselineMode(enum.Enum):
    AVG_COUNT = "avg-count"
    AVG_DURATION = "avg-duration"
    GT_COUNT = "gt-count"


@dataclass(frozen=True)
class BaselineSpec:
    mode: BaselineMode
    avg_count: Optional[int] = None
    avg_duration: Optional[float] = None

    def __post_init__(self):
        if self.mode is BaselineMode.AVG_COUNT and not (self.avg_count and self.avg_count > 0):
            raise ValueError("avg-count baseline needs a positive avg_count")
        if self.mode is BaselineMode.AVG_DURATION and not (self.avg_duration and self.avg_duration > 0):
            raise ValueError("avg-duration baseline needs a positive avg_duration")


def compute_dataset_stats(train: Sequence[VideoAnnotation]) -> tuple[int, float]:
    """Return ``(avg_count, avg_duration)`` of a training set.

    ``avg_count`` is the mean number of segments per video rounded half to
    even; ``avg_duration`` is the mean length of all segments, pooled.
    """
    if not train:
        raise ValueError("cannot compute statistics of an empty training set")
    counts = [len(v) for v in train]
    lengths = [s.duration for v in train for s in v.segments]
    if not lengths:
        raise ValueError("training set contains no segments")
    avg_count = max(1, round(sum(counts) / len(counts)))
    return avg_count, sum(lengths) / len(lengths)


def _tile(duration: float, k: int) -> list[Segment]:
    edges = [duration * i / k for i in range(k + 1)]
    edges[-1] = duration
    return [Segment(edges[i], edges[i + 1]) for i in range(k)]


def generate_uniform(
    video_id: str,
    duration: float,
    spec: BaselineSpec,
    gt_count: Optional[int] = None,
) -> VideoAnnotation:
    """Uniform segmentation of ``[0, duration]`` according to ``spec``.

    Equal-count modes tile the video into ``k`` equal pieces. The
    equal-duration mode emits ``ceil(duration / d)`` pieces of length ``d``
    with the last one clipped at the video end.
    """
    if duration <= 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    if spec.mode is BaselineMode.AVG_COUNT:
        segs = _tile(duration, spec.avg_count)
    elif spec.mode is BaselineMode.GT_COUNT:
        if gt_count is None or gt_count < 1:
            raise ValueError("gt-count baseline needs the ground-truth segment count")
        segs = _tile(duration, gt_count)
    else:
        d = spec.avg_duration
        k = max(1, math.ceil(duration / d))
        edges = [min(i * d, duration) for i in range(k)] + [duration]
        if k > 1 and edges[-1] - edges[-2] <= 1e-9 * d:  # float slop from ceil()
            del edges[-2]
        segs = [Segment(a, b) for a, b in zip(edges, edges[1:])]
    return VideoAnnotation(video_id, duration, tuple(segs), ground_truth=True)


def baseline_for_dataset(
    videos: Sequence[VideoAnnotation],
    spec: BaselineSpec,
) -> list[VideoAnnotation]:
    """Apply a baseline to every video; ``GT_COUNT`` reads counts from ``videos``."""
    return [
        generate_uniform(v.video_id, v.duration, spec, gt_count=len(v) if spec.mode is BaselineMode.GT_COUNT else None)
        for v in videos
    ]
