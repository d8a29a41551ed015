"""Threshold detection metrics and overlap (mIoU / mJaccard) metrics.

These reproduce the established procedure-segmentation metrics, including
their blind spots: a single proposal may be credited against several
ground-truth segments, and redundant proposals are never penalised by mIoU.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .segments import VideoAnnotation, build_cost_matrix


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ThresholdMetrics:
    tau: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class OverlapMetrics:
    miou: float
    mjaccard: float


def threshold_precision_recall(cost, tau: float) -> ThresholdMetrics:
    """Detection precision/recall at IoU threshold ``tau`` (strict ``>``).

    Precision counts the distinct proposals exceeding ``tau`` against any
    ground-truth segment; recall counts the ground-truth segments exceeding
    ``tau`` against any proposal.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    cost = np.asarray(cost, dtype=float)
    m, n = cost.shape
    if n == 0 or m == 0:
        return ThresholdMetrics(tau, 0.0, 0.0, 0.0)
    hits = cost > tau
    precision = float(hits.any(axis=0).sum()) / n
    recall = float(hits.any(axis=1).sum()) / m
    return ThresholdMetrics(tau, precision, recall, f1_score(precision, recall))


def mean_iou(cost) -> float:
    """Average over ground-truth rows of the best IoU with any proposal."""
    cost = np.asarray(cost, dtype=float)
    m, n = cost.shape
    if m == 0:
        raise ValueError("mean_iou needs at least one ground-truth segment")
    if n == 0:
        return 0.0
    return float(cost.max(axis=1).sum()) / m


def mean_jaccard(gt: VideoAnnotation, pred: VideoAnnotation) -> float:
    """Per-video mean over ground-truth segments of the best Jaccard overlap.

    For intervals the Jaccard index of ``g`` and ``p`` is ``|g & p| / |g | p|``,
    so within one video this equals :func:`mean_iou`. The two metrics differ
    at dataset level: :func:`aggregate_overlap` pools mIoU over all segments
    but averages mJaccard over videos.
    """
    cost = build_cost_matrix(gt, pred)
    if cost.shape[1] == 0:
        return 0.0
    best = [max(row) for row in cost.tolist()]
    return sum(best) / len(best)


def overlap_metrics(gt: VideoAnnotation, pred: VideoAnnotation) -> OverlapMetrics:
    return OverlapMetrics(mean_iou(build_cost_matrix(gt, pred)), mean_jaccard(gt, pred))


def aggregate_overlap(per_video: Sequence[OverlapMetrics], gt_counts: Sequence[int]) -> OverlapMetrics:
    """Dataset-level overlap metrics.

    mIoU is pooled over every ground-truth segment (weighted by segment
    count); mJaccard is the unweighted mean over videos.
    """
    if not per_video:
        raise ValueError("no videos to aggregate")
    if len(per_video) != len(gt_counts):
        raise ValueError("per_video and gt_counts differ in length")
    total = sum(gt_counts)
    miou = sum(v.miou * c for v, c in zip(per_video, gt_counts)) / total
    mjac = sum(v.mjaccard for v in per_video) / len(per_video)
    return OverlapMetrics(miou, mjac)
