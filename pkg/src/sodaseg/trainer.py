"""Toy boundary-refinement trainer.

A fixed set of proposals is optimised by plain gradient descent against a
single ground-truth video, either through the differentiable ordered
matcher or through Hungarian re-matching with an L1 boundary loss. This
stands in for the proposal decoder of a real segmentation model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .assignment import hungarian_match
from .ordered import SodaMetrics, aggregate, soda_from_cost
from .segments import VideoAnnotation, pairwise_iou
from .soft import DEFAULT_GAMMA, soft_match_loss
from .synth import SplitMix64, derive_seed

SOFT_SODA = "soft-soda"
HUNGARIAN = "hungarian"
MATCHERS = (SOFT_SODA, HUNGARIAN)

_FRAC_EPS = 1e-6


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, loss: float):
        super().__init__(f"loss became non-finite ({loss}) at iteration {iteration}")
        self.iteration = iteration
        self.loss = loss


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _logit(p):
    p = np.clip(p, _FRAC_EPS, 1.0 - _FRAC_EPS)
    return np.log(p) - np.log1p(-p)


@dataclass
class ProposalParams:
    """Unconstrained proposal parameters.

    ``center`` and ``log_halfwidth`` map to a segment through a logistic
    squash: centre ``D * s(center)``, half width ``D * s(log_halfwidth) / 2``,
    clipped to ``[0, D]``.
    """

    center: np.ndarray
    log_halfwidth: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.center, self.log_halfwidth])

    @classmethod
    def from_vector(cls, vec) -> "ProposalParams":
        vec = np.asarray(vec, dtype=float)
        n = vec.size // 2
        return cls(vec[:n].copy(), vec[n:].copy())

    @classmethod
    def from_bounds(cls, bounds, duration: float) -> "ProposalParams":
        b = np.asarray(bounds, dtype=float).reshape(-1, 2)
        mid = 0.5 * (b[:, 0] + b[:, 1]) / duration
        width = (b[:, 1] - b[:, 0]) / duration
        return cls(_logit(mid), _logit(width))

    def decode(self, duration: float) -> np.ndarray:
        return decode_with_jacobian(self, duration)[0]


def decode_with_jacobian(params: ProposalParams, duration: float):
    """Segment bounds and their elementwise partials w.r.t. the parameters.

    Returns ``(bounds, ds_dc, ds_dh, de_dc, de_dh)``; a clipped boundary has
    zero partials.
    """
    sc = _sigmoid(params.center)
    sh = _sigmoid(params.log_halfwidth)
    mid = duration * sc
    half = 0.5 * duration * sh
    raw_s, raw_e = mid - half, mid + half
    start = np.maximum(raw_s, 0.0)
    end = np.minimum(raw_e, duration)
    d_mid = duration * sc * (1.0 - sc)
    d_half = 0.5 * duration * sh * (1.0 - sh)
    free_s = raw_s > 0.0
    free_e = raw_e < duration
    bounds = np.stack([start, end], axis=1)
    return (
        bounds,
        np.where(free_s, d_mid, 0.0),
        np.where(free_s, -d_half, 0.0),
        np.where(free_e, d_mid, 0.0),
        np.where(free_e, d_half, 0.0),
    )


@dataclass(frozen=True)
class TrainConfig:
    matcher: str = SOFT_SODA
    gamma: float = DEFAULT_GAMMA
    step_size: float = 0.05
    iterations: int = 200
    num_proposals: int = 8
    seed: int = 0
    init_jitter: float = 0.2

    def __post_init__(self):
        if self.matcher not in MATCHERS:
            raise ValueError(f"matcher must be one of {MATCHERS}, got {self.matcher!r}")
        if self.step_size <= 0:
            raise ValueError("step_size must be > 0")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.num_proposals < 1:
            raise ValueError("num_proposals must be >= 1")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")


def soft_objective(gt: VideoAnnotation, params: ProposalParams, gamma: float):
    """Soft matching loss and its gradient w.r.t. the parameter vector."""
    bounds, ds_dc, ds_dh, de_dc, de_dh = decode_with_jacobian(params, gt.duration)
    loss, g = soft_match_loss(gt, bounds, gamma)
    grad_c = g[:, 0] * ds_dc + g[:, 1] * de_dc
    grad_h = g[:, 0] * ds_dh + g[:, 1] * de_dh
    return loss, np.concatenate([grad_c, grad_h])


def hungarian_objective(gt: VideoAnnotation, params: ProposalParams):
    """L1 boundary loss (in video-length units) over Hungarian-matched pairs.

    Proposals left unmatched receive no gradient.
    """
    bounds, ds_dc, ds_dh, de_dc, de_dh = decode_with_jacobian(params, gt.duration)
    gtb = gt.bounds
    match = hungarian_match(pairwise_iou(gtb, bounds))
    n = bounds.shape[0]
    g = np.zeros((n, 2))
    loss = 0.0
    for i, j, _ in match.pairs:
        diff = (bounds[j] - gtb[i]) / gt.duration
        loss += float(np.abs(diff).sum())
        g[j] += np.sign(diff) / gt.duration
    grad_c = g[:, 0] * ds_dc + g[:, 1] * de_dc
    grad_h = g[:, 0] * ds_dh + g[:, 1] * de_dh
    return loss, np.concatenate([grad_c, grad_h])


def evaluate_bounds(gt: VideoAnnotation, bounds) -> SodaMetrics:
    """Hard SODA-D of raw proposal bounds (sorted by start, then end)."""
    b = np.asarray(bounds, dtype=float).reshape(-1, 2)
    order = np.lexsort((b[:, 1], b[:, 0]))
    return soda_from_cost(pairwise_iou(gt.bounds, b[order]))


def uniform_init(duration: float, num_proposals: int, jitter: float, seed: int) -> np.ndarray:
    """Equal tiling of the video with Gaussian boundary noise.

    ``jitter`` is the noise standard deviation as a fraction of tile width.
    """
    rng = SplitMix64(seed)
    width = duration / num_proposals
    out = np.empty((num_proposals, 2))
    for k in range(num_proposals):
        s = k * width + jitter * width * rng.normal()
        e = (k + 1) * width + jitter * width * rng.normal()
        s, e = sorted((min(max(s, 0.0), duration), min(max(e, 0.0), duration)))
        if e - s < 0.05 * width:
            s, e = k * width, (k + 1) * width
        out[k] = (s, e)
    return out


@dataclass(frozen=True)
class TrajectoryPoint:
    iteration: int
    loss: float
    metrics: SodaMetrics


@dataclass
class TrainResult:
    matcher: str
    trajectory: list[TrajectoryPoint] = field(default_factory=list)
    final_bounds: Optional[np.ndarray] = None

    @property
    def initial(self) -> TrajectoryPoint:
        return self.trajectory[0]

    @property
    def final(self) -> TrajectoryPoint:
        return self.trajectory[-1]


def train_instance(gt: VideoAnnotation, config: TrainConfig, init=None) -> TrainResult:
    """Refine proposal boundaries against ``gt`` by gradient descent.

    ``init`` is an optional ``(n, 2)`` array of starting bounds; otherwise a
    jittered uniform tiling of ``config.num_proposals`` segments is used.
    Trajectory entry ``k`` holds the loss and hard SODA-D after ``k`` steps.
    """
    if len(gt) == 0:
        raise ValueError(f"video {gt.video_id!r}: no reference segments")
    if init is None:
        init = uniform_init(gt.duration, config.num_proposals, config.init_jitter, config.seed)
    params = ProposalParams.from_bounds(init, gt.duration)
    vec = params.vector

    def objective(v):
        p = ProposalParams.from_vector(v)
        if config.matcher == SOFT_SODA:
            return soft_objective(gt, p, config.gamma)
        return hungarian_objective(gt, p)

    result = TrainResult(config.matcher)
    for it in range(config.iterations + 1):
        loss, grad = objective(vec)
        if not (math.isfinite(loss) and np.all(np.isfinite(grad)) and np.all(np.isfinite(vec))):
            raise TrainingDiverged(it, loss)
        bounds = ProposalParams.from_vector(vec).decode(gt.duration)
        result.trajectory.append(TrajectoryPoint(it, loss, evaluate_bounds(gt, bounds)))
        if it < config.iterations:
            vec = vec - config.step_size * grad
    result.final_bounds = ProposalParams.from_vector(vec).decode(gt.duration)
    return result


def crossing_init(gt: VideoAnnotation, seed: int = 0, jitter: float = 0.02) -> np.ndarray:
    """Proposals that invite temporally crossed Hungarian matches.

    For each consecutive pair ``(g1, g2)`` of ground-truth segments three
    proposals are emitted: a long one starting late in ``g1`` and ending at
    the end of ``g2``, a short one covering the tail of ``g1``, and a
    late-shifted partial hit on ``g2``. A trailing unpaired segment gets a
    slightly shifted copy. ``jitter`` (fraction of segment length) adds
    Gaussian noise to every boundary.
    """
    rng = SplitMix64(seed)
    D = gt.duration
    b = gt.bounds
    out = []
    k = 0
    while k < len(b):
        a1, b1 = b[k]
        if k + 1 < len(b):
            a2, b2 = b[k + 1]
            l1, l2 = b1 - a1, b2 - a2
            out.append((a1 + 0.7 * l1, b2))
            out.append((a1 + 0.75 * l1, b1))
            out.append((a2 + 0.4 * l2, b2 + 0.4 * l2))
            k += 2
        else:
            l1 = b1 - a1
            out.append((a1 + 0.2 * l1, b1 + 0.2 * l1))
            k += 1
    noisy = []
    for s, e in out:
        scale = jitter * (e - s)
        s = s + scale * rng.normal()
        e = e + scale * rng.normal()
        s, e = min(max(s, 0.0), D), min(max(e, 0.0), D)
        if e - s < 1e-3:
            s, e = max(0.0, e - 1.0), e
        noisy.append((s, e))
    return np.array(noisy)


@dataclass
class SuiteSummary:
    """Per-matcher trained results over a dataset and several seeds."""

    results: dict[str, list[TrainResult]]

    def mean_f1(self, matcher: str, which: str = "final") -> float:
        runs = self.results[matcher]
        return float(np.mean([getattr(r, which).metrics.f1 for r in runs]))

    def aggregate(self, matcher: str, which: str = "final") -> SodaMetrics:
        return aggregate([getattr(r, which).metrics for r in self.results[matcher]])

    def as_dict(self) -> dict:
        out = {}
        for matcher in self.results:
            init, final = self.aggregate(matcher, "initial"), self.aggregate(matcher, "final")
            out[matcher] = {
                "runs": len(self.results[matcher]),
                "initial": {"precision": init.precision, "recall": init.recall, "f1": init.f1},
                "final": {"precision": final.precision, "recall": final.recall, "f1": final.f1},
            }
        return out


def train_suite(
    dataset: Sequence[VideoAnnotation],
    config: TrainConfig,
    seeds: Sequence[int] = (0,),
    matchers: Sequence[str] = MATCHERS,
    init: str = "uniform",
) -> SuiteSummary:
    """Train every video under each matcher and seed.

    ``init`` is ``"uniform"`` (jittered tiling) or ``"crossing"``
    (:func:`crossing_init`). Each (video, seed) pair gets its own derived
    initialisation seed shared by all matchers, so they start identically.
    """
    if not dataset:
        raise ValueError("cannot train on an empty dataset")
    if init not in ("uniform", "crossing"):
        raise ValueError(f"unknown init {init!r}")
    results: dict[str, list[TrainResult]] = {m: [] for m in matchers}
    for seed in seeds:
        for idx, gt in enumerate(dataset):
            run_seed = derive_seed(seed, idx)
            if init == "crossing":
                start = crossing_init(gt, run_seed)
            else:
                start = uniform_init(gt.duration, config.num_proposals, config.init_jitter, run_seed)
            for matcher in matchers:
                cfg = TrainConfig(
                    matcher=matcher,
                    gamma=config.gamma,
                    step_size=config.step_size,
                    iterations=config.iterations,
                    num_proposals=len(start),
                    seed=run_seed,
                    init_jitter=config.init_jitter,
                )
                results[matcher].append(train_instance(gt, cfg, init=start))
    return SuiteSummary(results)
