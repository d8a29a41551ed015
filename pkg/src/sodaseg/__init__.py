"""Order-aware evaluation and differentiable matching for temporal procedure segmentation."""

from .assignment import Assignment, hungarian_match
from .baselines import BaselineMode, BaselineSpec, compute_dataset_stats, generate_uniform
from .io import load_annotations, save_annotations, save_report
from .legacy import OverlapMetrics, ThresholdMetrics, mean_iou, mean_jaccard, threshold_precision_recall
from .ordered import DpTable, Matching, SodaMetrics, aggregate, dp_fill, ordered_match, soda_d, traceback
from .segments import AnnotationError, Segment, VideoAnnotation, build_cost_matrix, iou
from .soft import SoftMatchResult, smooth_min, soft_backward, soft_forward, soft_match_loss

__version__ = "0.1.0"

__all__ = [
    "AnnotationError",
    "Assignment",
    "BaselineMode",
    "BaselineSpec",
    "DpTable",
    "Matching",
    "OverlapMetrics",
    "Segment",
    "SodaMetrics",
    "SoftMatchResult",
    "ThresholdMetrics",
    "VideoAnnotation",
    "aggregate",
    "build_cost_matrix",
    "compute_dataset_stats",
    "dp_fill",
    "generate_uniform",
    "hungarian_match",
    "iou",
    "load_annotations",
    "mean_iou",
    "mean_jaccard",
    "ordered_match",
    "save_annotations",
    "save_report",
    "smooth_min",
    "soda_d",
    "soft_backward",
    "soft_forward",
    "soft_match_loss",
    "threshold_precision_recall",
    "traceback",
]
