"""Seeded synthetic procedures and perturbed predictions.

Randomness comes from SplitMix64 (Steele, Lea & Flood), a 64-bit
integer-state generator whose full algorithm is reproduced in
:class:`SplitMix64`, so any implementation can regenerate the same corpus:

* state advances by ``0x9E3779B97F4A7C15`` (mod 2**64) per draw;
* output mixes with multipliers ``0xBF58476D1CE4E5B9`` and
  ``0x94D049BB133111EB`` and shifts 30, 27, 31;
* ``uniform() = (next >> 11) * 2**-53``;
* ``randint(lo, hi) = lo + floor(uniform() * (hi - lo + 1))``;
* ``normal()`` is one Box-Muller cosine branch from two uniforms.

Perturbations run in a fixed order (jitter, drop, duplicate, swap,
spurious) and every stage consumes the same number of draws per segment
regardless of its probability, so toggling one stage never shifts the
random stream seen by another.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Optional

from .segments import Segment, VideoAnnotation

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_PRED_SALT = 0x5052454449435453  # b"PREDICTS"; separates prediction streams from gt streams


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next() >> 11) * (1.0 / (1 << 53))

    def uniform_range(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def randint(self, lo: int, hi: int) -> int:
        """Integer in ``[lo, hi]`` inclusive."""
        return lo + int(self.uniform() * (hi - lo + 1))

    def normal(self) -> float:
        u1 = 1.0 - self.uniform()  # (0, 1]
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def derive_seed(seed: int, index: int) -> int:
    """Independent stream seed for item ``index`` of a seeded batch."""
    return SplitMix64((seed ^ ((index + 1) * GOLDEN)) & MASK64).next()


@dataclass(frozen=True)
class Perturbation:
    jitter_sigma: float = 0.0
    drop_prob: float = 0.0
    duplicate_prob: float = 0.0
    swap_prob: float = 0.0
    spurious_prob: float = 0.0

    def __post_init__(self):
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        for name in ("drop_prob", "duplicate_prob", "swap_prob", "spurious_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    num_videos: int = 10
    duration_range: tuple[float, float] = (160.0, 480.0)
    segments_per_video_range: tuple[int, int] = (4, 12)
    gap_fraction: float = 0.51
    min_segment: float = 1.0
    seconds_per_segment: Optional[float] = None
    perturbation: Perturbation = field(default_factory=Perturbation)

    def __post_init__(self):
        lo, hi = self.duration_range
        if not 0 < lo <= hi:
            raise ValueError(f"invalid duration_range {self.duration_range}")
        klo, khi = self.segments_per_video_range
        if not 1 <= klo <= khi:
            raise ValueError(f"invalid segments_per_video_range {self.segments_per_video_range}")
        if not 0.0 <= self.gap_fraction < 1.0:
            raise ValueError(f"gap_fraction must lie in [0, 1), got {self.gap_fraction}")
        if self.num_videos < 0:
            raise ValueError("num_videos must be >= 0")
        if self.min_segment <= 0:
            raise ValueError("min_segment must be > 0")
        if self.seconds_per_segment is not None and self.seconds_per_segment <= 0:
            raise ValueError("seconds_per_segment must be > 0")


# Mean duration 320 s, ~7.8 segments per video (reported: 7.7 on average,
# 8 as the rounded baseline count), mean segment length 19.6 s.
YOUCOOK2_LIKE = SynthConfig(
    duration_range=(160.0, 480.0),
    segments_per_video_range=(3, 13),
    seconds_per_segment=320.0 / 7.8,
    gap_fraction=1.0 - 19.6 * 7.8 / 320.0,
)
# 10 segments of 6 s. The reported 54 s mean video length cannot hold ten
# 6 s steps, so videos here are longer (mean 65 s).
TASTY_LIKE = SynthConfig(
    duration_range=(40.0, 90.0),
    segments_per_video_range=(5, 15),
    seconds_per_segment=6.5,
    gap_fraction=1.0 - 6.0 * 10.0 / 65.0,
)


def _round_ms(t: float) -> float:
    return round(t, 3)


def generate_video(rng: SplitMix64, video_id: str, config: SynthConfig) -> VideoAnnotation:
    duration = _round_ms(rng.uniform_range(*config.duration_range))
    klo, khi = config.segments_per_video_range
    if config.seconds_per_segment is None:
        k = rng.randint(klo, khi)
    else:
        k = round(duration / config.seconds_per_segment) + rng.randint(-1, 1)
        k = min(max(k, klo), khi)
    covered = duration * (1.0 - config.gap_fraction)
    if covered < k * config.min_segment:
        raise ValueError(
            f"video {video_id!r}: cannot pack {k} segments of >= {config.min_segment} s "
            f"into {covered:.3f} s of foreground"
        )
    seg_w = [0.5 + rng.uniform() for _ in range(k)]
    gap_w = [0.5 + rng.uniform() for _ in range(k + 1)]
    spare = covered - k * config.min_segment
    lengths = [config.min_segment + spare * w / sum(seg_w) for w in seg_w]
    gap_total = duration - covered
    gaps = [gap_total * w / sum(gap_w) for w in gap_w]
    segs = []
    t = gaps[0]
    for i in range(k):
        start, end = _round_ms(t), _round_ms(min(t + lengths[i], duration))
        segs.append(Segment(start, end, summary=f"step {i + 1}"))
        t += lengths[i] + gaps[i + 1]
    return VideoAnnotation(video_id, duration, tuple(segs))


def generate_gt(config: SynthConfig) -> list[VideoAnnotation]:
    """Ground-truth procedures, deterministic for a fixed seed."""
    out = []
    for idx in range(config.num_videos):
        rng = SplitMix64(derive_seed(config.seed, idx))
        out.append(generate_video(rng, f"synth-{idx:05d}", config))
    return out


def perturb(gt: VideoAnnotation, perturbation: Perturbation, seed: int) -> VideoAnnotation:
    """Turn a ground-truth annotation into a plausible flawed prediction.

    * jitter: independent Gaussian noise on both boundaries, clipped to the
      video; a segment collapsing below 1 ms keeps its original bounds;
    * drop: remove a segment;
    * duplicate: emit an exact copy right after the segment;
    * swap: exchange the lengths of two neighbours inside their joint span,
      so both boundaries move while temporal order is kept;
    * spurious: insert a random extra segment of typical length.
    """
    rng = SplitMix64(seed)
    p = perturbation
    D = gt.duration
    segs = [(s.start, s.end, s.summary) for s in gt.segments]
    if not segs:
        return VideoAnnotation(gt.video_id, D, (), ground_truth=False)
    mean_len = sum(e - s for s, e, _ in segs) / len(segs)

    jittered = []
    for s, e, text in segs:
        ns = s + p.jitter_sigma * rng.normal()
        ne = e + p.jitter_sigma * rng.normal()
        ns, ne = sorted((min(max(ns, 0.0), D), min(max(ne, 0.0), D)))
        if ne - ns < 1e-3:
            ns, ne = s, e
        jittered.append((ns, ne, text))

    kept = [seg for seg in jittered if not rng.uniform() < p.drop_prob]

    duplicated = []
    for seg in kept:
        duplicated.append(seg)
        if rng.uniform() < p.duplicate_prob:
            duplicated.append(seg)

    swapped = list(duplicated)
    just_swapped = False
    for k in range(len(swapped) - 1):
        hit = rng.uniform() < p.swap_prob
        if hit and not just_swapped:
            (s1, e1, t1), (s2, e2, t2) = swapped[k], swapped[k + 1]
            la, lb = e1 - s1, e2 - s2
            swapped[k] = (s1, s1 + lb, t1)
            swapped[k + 1] = (e2 - la, e2, t2)
            just_swapped = True
        else:
            just_swapped = False

    final = []
    for seg in swapped:
        final.append(seg)
        hit = rng.uniform() < p.spurious_prob
        u_start, u_len = rng.uniform(), rng.uniform()
        if hit:
            start = u_start * D
            end = min(D, start + (0.5 + u_len) * mean_len)
            if end - start >= 1e-3:
                final.append((start, end, "spurious"))

    return VideoAnnotation(
        gt.video_id,
        D,
        tuple(Segment(s, e, summary=t) for s, e, t in final),
        ground_truth=False,
    )


def generate_predictions(gts: Iterable[VideoAnnotation], config: SynthConfig) -> list[VideoAnnotation]:
    """Perturb every video with its own derived seed stream."""
    base = derive_seed(config.seed ^ _PRED_SALT, 0)
    return [perturb(v, config.perturbation, derive_seed(base, idx)) for idx, v in enumerate(gts)]


_FLOAT_KEYS = {"gap_fraction", "min_segment", "seconds_per_segment", "duration_min", "duration_max"}
_INT_KEYS = {"seed", "num_videos", "segments_min", "segments_max"}
_PERTURB_KEYS = {f.name for f in fields(Perturbation)}


def parse_config(text: str, base: Optional[SynthConfig] = None) -> SynthConfig:
    """Parse ``key = value`` lines (``#`` starts a comment).

    A ``preset = youcook2|tasty`` line selects the starting point; other
    keys override it. Recognised keys: seed, num_videos, duration_min,
    duration_max, segments_min, segments_max, gap_fraction, min_segment,
    seconds_per_segment and
    the perturbation fields (jitter_sigma, drop_prob, duplicate_prob,
    swap_prob, spurious_prob).
    """
    items: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        items[key] = value

    cfg = base or SynthConfig()
    preset = items.pop("preset", None)
    if preset is not None:
        presets = {"youcook2": YOUCOOK2_LIKE, "tasty": TASTY_LIKE}
        if preset not in presets:
            raise ValueError(f"unknown preset {preset!r}; choose from {sorted(presets)}")
        cfg = presets[preset]

    unknown = set(items) - _FLOAT_KEYS - _INT_KEYS - _PERTURB_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")

    def num(key, cast):
        try:
            return cast(items[key])
        except ValueError:
            raise ValueError(f"config key {key!r}: cannot parse {items[key]!r}") from None

    changes: dict = {}
    for key in ("seed", "num_videos"):
        if key in items:
            changes[key] = num(key, int)
    for key in ("gap_fraction", "min_segment", "seconds_per_segment"):
        if key in items:
            changes[key] = num(key, float)
    lo, hi = cfg.duration_range
    changes["duration_range"] = (
        num("duration_min", float) if "duration_min" in items else lo,
        num("duration_max", float) if "duration_max" in items else hi,
    )
    klo, khi = cfg.segments_per_video_range
    changes["segments_per_video_range"] = (
        num("segments_min", int) if "segments_min" in items else klo,
        num("segments_max", int) if "segments_max" in items else khi,
    )
    pert = {k: num(k, float) for k in _PERTURB_KEYS if k in items}
    if pert:
        changes["perturbation"] = replace(cfg.perturbation, **pert)
    return replace(cfg, **changes)


def format_config(config: SynthConfig) -> str:
    p = config.perturbation
    lines = [
        f"seed = {config.seed}",
        f"num_videos = {config.num_videos}",
        f"duration_min = {config.duration_range[0]!r}",
        f"duration_max = {config.duration_range[1]!r}",
        f"segments_min = {config.segments_per_video_range[0]}",
        f"segments_max = {config.segments_per_video_range[1]}",
        f"gap_fraction = {config.gap_fraction!r}",
        f"min_segment = {config.min_segment!r}",
    ]
    if config.seconds_per_segment is not None:
        lines.append(f"seconds_per_segment = {config.seconds_per_segment!r}")
    lines += [f"{f.name} = {getattr(p, f.name)!r}" for f in fields(Perturbation)]
    return "\n".join(lines) + "\n"
