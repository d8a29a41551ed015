"""Differentiable relaxation of the ordered matcher (SoftSODA).

The IoU maximisation is turned into a minimisation over negated costs
``C' = -IoU`` and the hard ``min`` of the recurrence is replaced by the
log-sum-exp soft minimum of temperature ``gamma``::

    R[i][j] = smin(R[i-1][j], R[i-1][j-1] + C'[i][j], R[i][j-1])

with ``R[0][*] = R[*][0] = 0``. The soft score is ``-R[m][n]``; it upper
bounds the hard matched IoU sum and converges to it as ``gamma -> 0``.

The backward pass is the usual reverse-mode sweep over the DP lattice:
each cell's soft minimum distributes its adjoint to its three inputs with
softmax weights ``exp((R[i][j] - input) / gamma)``. The gradient with
respect to IoU entry ``(i, j)`` is the adjoint flowing through the
diagonal edge into that cell, i.e. the probability that a Gibbs-sampled
lattice path matches ``g_i`` with ``p_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .segments import VideoAnnotation

DEFAULT_GAMMA = 0.1


def smooth_min(values: Sequence[float], gamma: float) -> float:
    """``-gamma * log(sum(exp(-v / gamma)))`` with max-shift."""
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if len(values) == 0:
        raise ValueError("smooth_min of an empty sequence")
    lo = min(values)
    acc = 0.0
    for v in values:
        acc += math.exp(-(v - lo) / gamma)
    return lo - gamma * math.log(acc)


def _forward_table(iou: np.ndarray, gamma: float) -> list[list[float]]:
    m, n = iou.shape
    c = iou.tolist()
    exp, log = math.exp, math.log
    R = [[0.0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        prev, row, ci = R[i - 1], R[i], c[i - 1]
        for j in range(1, n + 1):
            a, b, d = prev[j], prev[j - 1] - ci[j - 1], row[j - 1]
            lo = min(a, b, d)
            row[j] = lo - gamma * log(exp((lo - a) / gamma) + exp((lo - b) / gamma) + exp((lo - d) / gamma))
    return R


def soft_forward(cost, gamma: float = DEFAULT_GAMMA) -> float:
    """Soft matched-IoU score of an IoU cost matrix."""
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    cost = np.asarray(cost, dtype=float)
    if cost.shape[0] == 0 or cost.shape[1] == 0:
        return 0.0
    return -_forward_table(cost, gamma)[-1][-1]


@dataclass(frozen=True)
class SoftMatchResult:
    soft_score: float
    grad_cost: np.ndarray
    alignment: np.ndarray
    gamma: float


def soft_backward(cost, gamma: float = DEFAULT_GAMMA) -> SoftMatchResult:
    """Soft score plus its exact gradient with respect to every IoU entry."""
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    cost = np.asarray(cost, dtype=float)
    m, n = cost.shape
    if m == 0 or n == 0:
        return SoftMatchResult(0.0, np.zeros((m, n)), np.zeros((m, n)), gamma)
    R = _forward_table(cost, gamma)
    c = cost.tolist()
    exp = math.exp
    # E[i][j] = d R[m][n] / d R[i][j]
    E = [[0.0] * (n + 1) for _ in range(m + 1)]
    E[m][n] = 1.0
    diag_flow = np.zeros((m, n))
    for i in range(m, 0, -1):
        R_prev, R_row, E_prev, E_row = R[i - 1], R[i], E[i - 1], E[i]
        for j in range(n, 0, -1):
            e = E_row[j]
            if e == 0.0:
                continue
            r = R_row[j]
            flow = e * exp((r - R_prev[j - 1] + c[i - 1][j - 1]) / gamma)
            E_prev[j] += e * exp((r - R_prev[j]) / gamma)
            E_prev[j - 1] += flow
            E_row[j - 1] += e * exp((r - R_row[j - 1]) / gamma)
            diag_flow[i - 1, j - 1] = flow
    # score = -R[m][n] and R depends on -IoU, so d score / d IoU = diag_flow.
    return SoftMatchResult(-R[m][n], diag_flow, np.clip(diag_flow, 0.0, 1.0), gamma)


def iou_and_grad(gt_bounds, pred_bounds) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """IoU matrix and its partial derivatives w.r.t. prediction start/end.

    Off the kinks this is the ordinary derivative of the active linear
    piece. Where a prediction boundary coincides exactly with the gt
    boundary the mean of the two one-sided derivatives is used. Pairs with
    no overlap have zero gradient.
    """
    g = np.asarray(gt_bounds, dtype=float).reshape(-1, 2)
    p = np.asarray(pred_bounds, dtype=float).reshape(-1, 2)
    gs, ge = g[:, 0:1], g[:, 1:2]
    ps, pe = p[None, :, 0], p[None, :, 1]
    lo = np.maximum(gs, ps)
    hi = np.minimum(ge, pe)
    inter = hi - lo
    overlap = inter > 0
    inter = np.where(overlap, inter, 0.0)
    union = (ge - gs) + (pe - ps) - inter
    safe_union = np.where(union > 0, union, 1.0)
    value = np.where(overlap, inter / safe_union, 0.0)

    # d inter / d ps: -1 when the prediction start is the binding lower bound.
    # Exactly coincident boundaries sit on the kink itself; take the midpoint
    # of the two one-sided slopes so a perfect match is a stationary point.
    d_inter_ds = np.where(ps > gs, -1.0, np.where(ps == gs, -0.5, 0.0))
    d_inter_de = np.where(pe < ge, 1.0, np.where(pe == ge, 0.5, 0.0))
    d_union_ds = -1.0 - d_inter_ds
    d_union_de = 1.0 - d_inter_de
    d_ds = (d_inter_ds * union - inter * d_union_ds) / safe_union**2
    d_de = (d_inter_de * union - inter * d_union_de) / safe_union**2
    d_ds = np.where(overlap, d_ds, 0.0)
    d_de = np.where(overlap, d_de, 0.0)
    return value, d_ds, d_de


def soft_match_loss(gt: VideoAnnotation, pred_bounds, gamma: float = DEFAULT_GAMMA):
    """Matching loss ``m - soft_score`` and its gradient w.r.t. boundaries.

    ``pred_bounds`` is an ``(n, 2)`` array of ``[start, end]`` rows.
    Returns ``(loss, grad)`` where ``grad`` has the shape of ``pred_bounds``.
    """
    pred_bounds = np.asarray(pred_bounds, dtype=float).reshape(-1, 2)
    m = len(gt)
    if m == 0:
        raise ValueError(f"video {gt.video_id!r}: no reference segments")
    value, d_ds, d_de = iou_and_grad(gt.bounds, pred_bounds)
    res = soft_backward(value, gamma)
    grad = np.zeros_like(pred_bounds)
    if pred_bounds.shape[0]:
        grad[:, 0] = -(res.grad_cost * d_ds).sum(axis=0)
        grad[:, 1] = -(res.grad_cost * d_de).sum(axis=0)
    return m - res.soft_score, grad
