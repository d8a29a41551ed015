"""Order-respecting one-to-one segment matching (SODA-D).

The dynamic program fills ``S[i][j]``, the best summed IoU achievable when
matching the first ``i`` ground-truth segments against the first ``j``
predictions with both index sequences strictly increasing::

    S[i][j] = max(S[i-1][j], S[i-1][j-1] + C[i-1][j-1], S[i][j-1])

with ``S[0][*] = S[*][0] = 0``. Tracing back the diagonal moves yields the
matched pairs, from which precision (normalised by prediction count),
recall (normalised by ground-truth count) and F1 follow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .legacy import f1_score
from .segments import VideoAnnotation, build_cost_matrix, normalize_predictions

LEFT, TOP, DIAGONAL = "L", "T", "D"


@dataclass(frozen=True)
class DpTable:
    scores: np.ndarray  # (m+1, n+1)
    moves: np.ndarray  # (m+1, n+1) of "L"/"T"/"D"; "" at the origin


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int, float], ...]
    total_score: float

    @property
    def gt_indices(self) -> list[int]:
        return [p[0] for p in self.pairs]

    @property
    def pred_indices(self) -> list[int]:
        return [p[1] for p in self.pairs]


@dataclass(frozen=True)
class SodaMetrics:
    precision: float
    recall: float
    f1: float
    matched_miou: float
    total_score: float = 0.0
    num_gt: int = 0
    num_pred: int = 0


def dp_fill(cost) -> DpTable:
    """Fill the score table and record the chosen move of every cell.

    Ties prefer Diagonal, then Top, then Left. A diagonal with zero IoU can
    never beat Top (``S`` is monotone), so it is never chosen.
    """
    cost = np.asarray(cost, dtype=float)
    m, n = cost.shape
    scores = np.zeros((m + 1, n + 1))
    moves = np.full((m + 1, n + 1), "", dtype="<U1")
    moves[1:, 0] = TOP
    moves[0, 1:] = LEFT
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            c = cost[i - 1, j - 1]
            diag = scores[i - 1, j - 1] + c
            top = scores[i - 1, j]
            left = scores[i, j - 1]
            if c > 0 and diag >= top and diag >= left:
                scores[i, j], moves[i, j] = diag, DIAGONAL
            elif top >= left:
                scores[i, j], moves[i, j] = top, TOP
            else:
                scores[i, j], moves[i, j] = left, LEFT
    return DpTable(scores, moves)


def traceback(table: DpTable, cost) -> Matching:
    """Walk the recorded moves back from ``(m, n)`` and collect matches."""
    cost = np.asarray(cost, dtype=float)
    i, j = cost.shape
    pairs = []
    while i > 0 and j > 0:
        move = table.moves[i, j]
        if move == DIAGONAL:
            if cost[i - 1, j - 1] > 0:
                pairs.append((i - 1, j - 1, float(cost[i - 1, j - 1])))
            i, j = i - 1, j - 1
        elif move == TOP:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    total = 0.0
    for _, _, v in pairs:
        total += v
    return Matching(tuple(pairs), total)


def ordered_match(cost) -> Matching:
    return traceback(dp_fill(cost), cost)


def soda_from_cost(cost) -> SodaMetrics:
    cost = np.asarray(cost, dtype=float)
    m, n = cost.shape
    if m == 0:
        raise ValueError("SODA-D needs at least one ground-truth segment")
    if n == 0:
        return SodaMetrics(0.0, 0.0, 0.0, 0.0, 0.0, m, 0)
    total = ordered_match(cost).total_score
    precision = total / n
    recall = total / m
    return SodaMetrics(precision, recall, f1_score(precision, recall), total / m, total, m, n)


def soda_d(
    gt: VideoAnnotation,
    pred: VideoAnnotation,
    top_n: Optional[int] = None,
    sort: bool = True,
) -> SodaMetrics:
    """SODA-D precision, recall, F1 and matched mIoU for one video.

    Predictions are sorted temporally (after optional top-N confidence
    selection). ``sort=False`` evaluates them in the order given, which is
    only meaningful for studying order sensitivity.
    """
    if sort or top_n is not None:
        pred = normalize_predictions(pred, top_n)
    return soda_from_cost(build_cost_matrix(gt, pred))


def aggregate(
    per_video: Sequence[SodaMetrics],
    weights: Optional[Sequence[float]] = None,
    micro: bool = False,
) -> SodaMetrics:
    """Combine per-video scores into one dataset-level score.

    The default is the plain mean over videos of every field. ``weights``
    turns it into a weighted mean. ``micro=True`` instead pools matched IoU
    and segment counts over the whole dataset before dividing.
    """
    if not per_video:
        raise ValueError("cannot aggregate an empty list of metrics")
    num_gt = sum(v.num_gt for v in per_video)
    num_pred = sum(v.num_pred for v in per_video)
    total = sum(v.total_score for v in per_video)
    if micro:
        precision = total / num_pred if num_pred else 0.0
        recall = total / num_gt if num_gt else 0.0
        return SodaMetrics(
            precision, recall, f1_score(precision, recall), recall, total, num_gt, num_pred
        )
    if weights is None:
        w = np.full(len(per_video), 1.0 / len(per_video))
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(per_video),) or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be non-negative, one per video, with positive sum")
        w = w / w.sum()

    def mean(name):
        return float(sum(wi * getattr(v, name) for wi, v in zip(w, per_video)))

    return SodaMetrics(
        mean("precision"), mean("recall"), mean("f1"), mean("matched_miou"), total, num_gt, num_pred
    )


def render_grid(values, fmt: str = "{:.2f}", row_label: str = "g", col_label: str = "p") -> str:
    """Plain-text grid with 1-based ``g``/``p`` headers."""
    arr = np.asarray(values)
    rows, cols = arr.shape
    cells = [[fmt.format(v) if not isinstance(v, str) else v for v in row] for row in arr.tolist()]
    width = max([len(c) for row in cells for c in row] + [len(f"{col_label}{cols}"), 4])
    head = " " * 4 + " ".join(f"{col_label}{j + 1}".rjust(width) for j in range(cols))
    lines = [head]
    for i, row in enumerate(cells):
        lines.append(f"{row_label}{i + 1}".ljust(4) + " ".join(c.rjust(width) for c in row))
    return "\n".join(lines)
