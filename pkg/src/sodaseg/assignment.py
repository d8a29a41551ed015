"""Maximum-weight one-to-one assignment (Hungarian matching) on IoU.

This is the matcher used by DETR-style set losses. It ignores temporal
order, so it can pair an early proposal with a late ground-truth segment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int, float], ...]
    total_score: float

    @property
    def is_monotone(self) -> bool:
        """True when matched prediction indices increase with gt index."""
        preds = [p[1] for p in self.pairs]
        return all(a < b for a, b in zip(preds, preds[1:]))


def _solve(weights: np.ndarray, rows: list[int], cols: list[int]) -> tuple[float, dict[int, int]]:
    """Best total and an optimal row -> column map on a sub-grid."""
    if not rows:
        return 0.0, {}
    sub = weights[np.ix_(rows, cols)]
    r_idx, c_idx = linear_sum_assignment(-sub)
    return float(sub[r_idx, c_idx].sum()), {rows[a]: cols[b] for a, b in zip(r_idx, c_idx)}


def _padded(cost: np.ndarray) -> np.ndarray:
    m, n = cost.shape
    size = max(m, n)
    out = np.zeros((size, size))
    out[:m, :n] = cost
    return out


def _row_order_total(weights: np.ndarray, mapping: dict[int, int]) -> float:
    total = 0.0
    for r in sorted(mapping):
        total += float(weights[r, mapping[r]])
    return total


def hungarian_match(cost) -> Assignment:
    """Optimal 1-to-1 assignment maximising summed IoU.

    Rectangular matrices are zero-padded to square. Every real ground-truth
    row is paired when ``m <= n`` (every prediction column otherwise), so
    zero-IoU pairs may appear. Among optimal assignments the
    lexicographically smallest pair list (sorted by gt index) is returned.
    """
    cost = np.asarray(cost, dtype=float)
    m, n = cost.shape
    if m == 0 or n == 0:
        return Assignment((), 0.0)
    work = _padded(cost)
    size = work.shape[0]
    target, completion = _solve(work, list(range(size)), list(range(size)))
    # Summing k non-negative terms in a different order moves the result by
    # at most ~k ulps of the total; the band only prunes probes, acceptance
    # below compares exact gt-order sums.
    tol = 4 * size * _EPS * abs(target)
    incumbent = _row_order_total(work, completion)

    # Fix rows in order, each to the smallest column that still admits an
    # optimal completion. The current completion certifies its own column,
    # so only smaller columns need probing.
    free_cols = list(range(size))
    chosen: dict[int, int] = {}
    fixed = 0.0
    for r in range(size):
        rest_rows = list(range(r + 1, size))
        pick = completion[r]
        for c in free_cols:
            if c >= pick:
                break
            rest_cols = [k for k in free_cols if k != c]
            bound = fixed + work[r, c] + sum(work[k, rest_cols].max() for k in rest_rows)
            if bound < target - tol:
                continue
            _, sub = _solve(work, rest_rows, rest_cols)
            total = _row_order_total(work, {**chosen, r: c, **sub})
            if total >= incumbent:
                pick, completion, incumbent = c, {**chosen, r: c, **sub}, total
                break
        chosen[r] = pick
        fixed += work[r, pick]
        free_cols.remove(pick)
    chosen = sorted(chosen.items())

    pairs = tuple((r, c, float(cost[r, c])) for r, c in chosen if r < m and c < n)
    total = 0.0
    for _, _, v in pairs:
        total += v
    return Assignment(pairs, total)
