import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sodaseg.fixtures import worked_example
from sodaseg.segments import (
    AnnotationError,
    Segment,
    VideoAnnotation,
    build_cost_matrix,
    iou,
    normalize_predictions,
    pairwise_iou,
    select_top_n,
    sort_segments,
)

coord = st.floats(min_value=0.0, max_value=1000.0, allow_nan=False, allow_infinity=False)


@st.composite
def segments(draw):
    a = draw(coord)
    length = draw(st.floats(min_value=1e-3, max_value=500.0))
    return Segment(a, a + length)


def test_iou_basic_cases():
    assert iou(Segment(0, 2), Segment(0, 2)) == 1.0
    assert iou(Segment(0, 1), Segment(2, 3)) == 0.0
    assert iou(Segment(0, 2), Segment(1, 3)) == pytest.approx(1 / 3, abs=1e-15)


def test_touching_segments_do_not_overlap():
    assert iou(Segment(0, 2), Segment(2, 4)) == 0.0


@pytest.mark.parametrize("start,end", [(1.0, 1.0), (2.0, 1.0), (-1.0, 2.0), (0.0, math.inf), (math.nan, 1.0)])
def test_invalid_segments_rejected(start, end):
    with pytest.raises(AnnotationError):
        Segment(start, end)


def test_confidence_range_checked():
    Segment(0, 1, confidence=0.0)
    with pytest.raises(AnnotationError):
        Segment(0, 1, confidence=1.5)


@given(segments(), segments())
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


@given(segments(), segments())
def test_iou_zero_iff_interiors_disjoint(a, b):
    disjoint = min(a.end, b.end) <= max(a.start, b.start)
    assert (iou(a, b) == 0.0) == disjoint


@given(segments(), segments())
def test_iou_one_iff_identical(a, b):
    assert iou(a, a) == 1.0
    if iou(a, b) == 1.0:
        # equality up to rounding of the union
        tol = 1e-12 * max(a.end, b.end)
        assert abs(a.start - b.start) <= tol and abs(a.end - b.end) <= tol


@given(segments(), segments(), st.floats(min_value=0.0, max_value=100.0), st.floats(min_value=0.1, max_value=10.0))
def test_iou_translation_and_scale_invariant(a, b, shift, scale):
    base = iou(a, b)
    moved = iou(Segment(a.start + shift, a.end + shift), Segment(b.start + shift, b.end + shift))
    scaled = iou(Segment(a.start * scale, a.end * scale), Segment(b.start * scale, b.end * scale))
    assert moved == pytest.approx(base, abs=1e-6)
    assert scaled == pytest.approx(base, abs=1e-9)


def test_cost_matrix_examples():
    gt = VideoAnnotation("v", 10, (Segment(0, 2),))
    pred = VideoAnnotation("v", 10, (Segment(0, 2),), ground_truth=False)
    assert build_cost_matrix(gt, pred).tolist() == [[1.0]]
    gt2 = VideoAnnotation("v", 10, (Segment(0, 2), Segment(2, 4)))
    pred2 = VideoAnnotation("v", 10, (Segment(1, 3),), ground_truth=False)
    np.testing.assert_allclose(build_cost_matrix(gt2, pred2), [[1 / 3], [1 / 3]], atol=1e-15)


def test_cost_matrix_empty_cases():
    gt = VideoAnnotation("v", 10, (Segment(0, 2), Segment(3, 4)))
    empty = VideoAnnotation("v", 10, (), ground_truth=False)
    assert build_cost_matrix(gt, empty).shape == (2, 0)
    with pytest.raises(AnnotationError, match="no reference segments"):
        build_cost_matrix(VideoAnnotation("v", 10, ()), gt)


def test_worked_example_matrix():
    gt, pred = worked_example()
    c = build_cost_matrix(gt, pred)
    assert c[0, 0] == pytest.approx(0.26, abs=1e-12)
    assert c[0, 1] == pytest.approx(0.32, abs=1e-12)
    assert c[1, 1] == pytest.approx(0.49, abs=1e-12)
    assert c[2, 3] == pytest.approx(0.75, abs=1e-12)
    # p2 is the row maximum for both g1 and g2
    assert list(c.argmax(axis=1)) == [1, 1, 3]


@given(st.lists(segments(), min_size=1, max_size=6), st.randoms(use_true_random=False))
def test_permuting_predictions_permutes_columns(preds, rnd):
    gt = VideoAnnotation("v", 2000, (Segment(0, 100), Segment(200, 400), Segment(600, 900)))
    perm = list(range(len(preds)))
    rnd.shuffle(perm)
    a = build_cost_matrix(gt, VideoAnnotation("v", 2000, tuple(preds), ground_truth=False))
    b = build_cost_matrix(gt, VideoAnnotation("v", 2000, tuple(preds[k] for k in perm), ground_truth=False))
    np.testing.assert_array_equal(a[:, perm], b)


def test_pairwise_iou_agrees_with_scalar():
    rng = np.random.default_rng(3)
    starts = rng.uniform(0, 50, size=(12, 1))
    b = np.hstack([starts, starts + rng.uniform(0.5, 30, size=(12, 1))])
    gt, pr = b[:5], b[5:]
    ref = [[iou(Segment(*g), Segment(*p)) for p in pr] for g in gt]
    np.testing.assert_allclose(pairwise_iou(gt, pr), ref, rtol=0, atol=1e-15)


def test_ground_truth_invariants():
    with pytest.raises(AnnotationError, match="overlap"):
        VideoAnnotation("v", 10, (Segment(0, 3), Segment(2, 4)))
    with pytest.raises(AnnotationError, match="sorted"):
        VideoAnnotation("v", 10, (Segment(5, 6), Segment(0, 1)))
    with pytest.raises(AnnotationError, match="exceeds duration"):
        VideoAnnotation("v", 10, (Segment(5, 11),))
    # predictions may overlap and be unsorted
    VideoAnnotation("v", 10, (Segment(5, 6), Segment(0, 7)), ground_truth=False)


def test_sort_and_top_n():
    segs = [Segment(5, 6, confidence=0.9), Segment(0, 2, confidence=0.1), Segment(0, 1, confidence=0.5)]
    assert sort_segments(segs) == [segs[2], segs[1], segs[0]]
    assert select_top_n(segs, 2) == [segs[0], segs[2]]
    pred = VideoAnnotation("v", 10, tuple(segs), ground_truth=False)
    norm = normalize_predictions(pred, top_n=2)
    assert [(s.start, s.end) for s in norm.segments] == [(0, 1), (5, 6)]
    with pytest.raises(ValueError):
        select_top_n(segs, 0)
