import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_ordered
from sodaseg.fixtures import crossing_example, worked_example
from sodaseg.legacy import mean_iou, threshold_precision_recall
from sodaseg.ordered import (
    SodaMetrics,
    aggregate,
    dp_fill,
    ordered_match,
    render_grid,
    soda_d,
    soda_from_cost,
    traceback,
)
from sodaseg.segments import Segment, VideoAnnotation, build_cost_matrix

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
# an eighths grid makes exact score ties common
grid = st.integers(0, 8).map(lambda k: k / 8)
matrices = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda s: st.one_of(arrays(float, s, elements=unit), arrays(float, s, elements=grid))
)


def test_single_cell():
    t = dp_fill([[0.7]])
    assert t.scores[1, 1] == 0.7 and t.moves[1, 1] == "D"


def test_worked_example_table_and_pairs():
    gt, pred = worked_example()
    c = build_cost_matrix(gt, pred)
    t = dp_fill(c)
    assert t.scores[3, 4] == pytest.approx(1.50, abs=1e-12)
    m = traceback(t, c)
    assert [(i, j) for i, j, _ in m.pairs] == [(0, 0), (1, 1), (2, 3)]
    assert [v for _, _, v in m.pairs] == pytest.approx([0.26, 0.49, 0.75], abs=1e-12)


def test_worked_example_metrics():
    gt, pred = worked_example()
    sm = soda_d(gt, pred)
    assert sm.matched_miou == pytest.approx(0.50, abs=1e-12)
    assert sm.precision == pytest.approx(0.375, abs=1e-12)
    assert sm.recall == pytest.approx(0.50, abs=1e-12)
    assert sm.f1 == pytest.approx(2 * 0.375 * 0.5 / 0.875, abs=1e-12)


def test_trivial_tracebacks():
    assert ordered_match(np.zeros((3, 4))).pairs == ()
    assert ordered_match(np.zeros((3, 4))).total_score == 0.0
    eye = np.eye(4) * 0.9 + 0.01
    assert [(i, j) for i, j, _ in ordered_match(eye).pairs] == [(k, k) for k in range(4)]


def test_perfect_prediction():
    gt, _ = worked_example()
    sm = soda_d(gt, VideoAnnotation(gt.video_id, gt.duration, gt.segments, ground_truth=False))
    assert (sm.precision, sm.recall, sm.f1) == (1.0, 1.0, 1.0)


def test_corrected_recall_scenario():
    # one proposal straddles g1/g2, so only two gt segments can be matched
    gt = VideoAnnotation("v", 50, (Segment(0, 10), Segment(10, 20), Segment(30, 40)))
    pred = VideoAnnotation("v", 50, (Segment(4, 19), Segment(30, 40)), ground_truth=False)
    c = build_cost_matrix(gt, pred)
    assert threshold_precision_recall(c, 0.3).recall == 1.0
    m = ordered_match(c)
    assert m.gt_indices == [1, 2]
    assert len(m.pairs) / len(gt) == pytest.approx(2 / 3)
    assert soda_from_cost(c).recall == pytest.approx((9 / 16 + 1.0) / 3)


def test_empty_predictions_score_zero():
    gt, _ = worked_example()
    sm = soda_d(gt, VideoAnnotation(gt.video_id, gt.duration, (), ground_truth=False))
    assert (sm.precision, sm.recall, sm.f1, sm.matched_miou) == (0, 0, 0, 0)


def test_random_5x6_against_enumeration():
    rng = np.random.default_rng(56)
    c = rng.random((5, 6))
    assert dp_fill(c).scores[5, 6] == brute_ordered(c)[0]


@settings(max_examples=300)
@given(matrices)
def test_dp_equals_brute_force(c):
    t = dp_fill(c)
    m, n = c.shape
    assert t.scores[m, n] == brute_ordered(c)[0]
    assert np.all(t.scores[0, :] == 0) and np.all(t.scores[:, 0] == 0)
    assert np.all(np.diff(t.scores, axis=0) >= 0) and np.all(np.diff(t.scores, axis=1) >= 0)


@given(matrices)
def test_matching_invariants(c):
    m = ordered_match(c)
    gi, pj = m.gt_indices, m.pred_indices
    assert all(a < b for a, b in zip(gi, gi[1:]))
    assert all(a < b for a, b in zip(pj, pj[1:]))
    assert all(v > 0 for _, _, v in m.pairs)
    assert m.total_score == dp_fill(c).scores[-1, -1]
    assert m.total_score == pytest.approx(sum(v for _, _, v in m.pairs), abs=1e-12)


@given(matrices)
def test_soda_bounded_by_mean_iou(c):
    assert soda_from_cost(c).matched_miou <= mean_iou(c) + 1e-12


def _one_gt_per_column(c):
    """Zero all but the largest entry of each column."""
    out = np.zeros_like(c)
    rows = c.argmax(axis=0)
    out[rows, np.arange(c.shape[1])] = c[rows, np.arange(c.shape[1])]
    return out


@given(matrices.map(_one_gt_per_column))
def test_duplication_halves_precision(c):
    # holds whenever each proposal overlaps at most one gt segment
    doubled = np.repeat(c, 2, axis=1)  # each copy stays next to its original
    a, b = soda_from_cost(c), soda_from_cost(doubled)
    assert b.total_score == a.total_score
    assert b.precision == a.precision / 2
    assert b.recall == a.recall
    if a.f1 > 0:
        assert b.f1 < a.f1


def test_duplicated_straddling_proposal_can_match_twice():
    # one proposal across two gt segments: its copy picks up the second one
    gt = VideoAnnotation("v", 30, (Segment(0, 10), Segment(10, 20)))
    pred = VideoAnnotation("v", 30, (Segment(5, 15),), ground_truth=False)
    doubled = VideoAnnotation("v", 30, pred.segments * 2, ground_truth=False)
    a, b = soda_d(gt, pred), soda_d(gt, doubled)
    assert b.total_score == 2 * a.total_score
    assert b.precision == a.precision


@given(st.integers(1, 6).flatmap(lambda k: arrays(float, (k, k), elements=unit)))
def test_square_gives_equal_scores(c):
    sm = soda_from_cost(c)
    assert sm.precision == sm.recall == sm.matched_miou
    assert sm.f1 == pytest.approx(sm.precision, abs=1e-15)


def test_swapping_proposals_changes_score():
    gt, pred = crossing_example()
    swapped = VideoAnnotation(pred.video_id, pred.duration, (pred.segments[0], pred.segments[2], pred.segments[1]), ground_truth=False)
    base = soda_d(gt, pred, sort=False)
    alt = soda_d(gt, swapped, sort=False)
    assert alt.f1 < base.f1
    # the default path sorts, so the order of the file does not matter
    assert soda_d(gt, swapped) == base


def test_aggregate():
    a = SodaMetrics(0.2, 0.2, 0.2, 0.2, 0.2, 1, 1)
    b = SodaMetrics(0.4, 0.4, 0.4, 0.4, 0.8, 2, 2)
    assert aggregate([a]).f1 == a.f1
    assert aggregate([a, b]).f1 == pytest.approx(0.3)
    assert aggregate([b, b, b]).precision == pytest.approx(b.precision)
    assert aggregate([a, b], weights=[0, 1]).f1 == pytest.approx(0.4)
    micro = aggregate([a, b], micro=True)
    assert micro.recall == pytest.approx(1.0 / 3)
    with pytest.raises(ValueError):
        aggregate([])
    with pytest.raises(ValueError):
        aggregate([a], weights=[-1])


def test_render_grid():
    text = render_grid(np.array([[0.26, 0.32]]))
    assert text.splitlines()[0].split() == ["p1", "p2"]
    assert text.splitlines()[1].split() == ["g1", "0.26", "0.32"]
