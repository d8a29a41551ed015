import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_ordered, central_fd, relative_error
from sodaseg.fixtures import worked_example
from sodaseg.ordered import ordered_match
from sodaseg.segments import Segment, VideoAnnotation, build_cost_matrix
from sodaseg.soft import _forward_table, iou_and_grad, smooth_min, soft_backward, soft_forward, soft_match_loss

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
matrices = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(lambda s: arrays(float, s, elements=unit))
gammas = st.sampled_from([1e-3, 0.01, 0.05, 0.1, 0.5, 1.0])
FD_FLOOR = 1e-5


def test_smooth_min_examples():
    assert smooth_min([1.0, 1.0], 0.5) == pytest.approx(1 - 0.5 * math.log(2), abs=1e-15)
    assert smooth_min([0.0, 100.0], 0.01) == pytest.approx(0.0, abs=1e-9)
    assert smooth_min([0.37], 0.2) == 0.37


def test_smooth_min_errors():
    with pytest.raises(ValueError):
        smooth_min([], 0.1)
    with pytest.raises(ValueError):
        smooth_min([1.0], 0.0)
    with pytest.raises(ValueError):
        soft_forward(np.eye(2), -1.0)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), gammas)
def test_smooth_min_sandwich(values, gamma):
    s = smooth_min(values, gamma)
    lo = min(values)
    assert s <= lo
    assert lo <= s + gamma * math.log(len(values)) + 1e-12


def test_smooth_min_stable_for_large_inputs():
    assert smooth_min([1e6, 1e6 + 1], 1e-3) == pytest.approx(1e6, abs=1e-9)


def test_single_cell_limit():
    assert soft_forward([[0.7]], 0.01) == pytest.approx(0.7, abs=0.01 * math.log(3))
    res = soft_backward([[0.7]], 1e-3)
    assert res.alignment[0, 0] == pytest.approx(1.0, abs=1e-9)


def test_worked_example_forward_and_alignment():
    gt, pred = worked_example()
    c = build_cost_matrix(gt, pred)
    assert abs(soft_forward(c, 1e-3) - 1.50) <= 1e-3
    a = soft_backward(c, 1e-3).alignment
    expected = np.zeros((3, 4))
    expected[0, 0] = expected[1, 1] = expected[2, 3] = 1.0
    np.testing.assert_allclose(a, expected, atol=1e-6)


def test_random_4x5_approaches_hard_score():
    c = np.random.default_rng(45).random((4, 5))
    hard = brute_ordered(c)[0]
    gaps = []
    for gamma in (1.0, 0.1, 0.01):
        soft = soft_forward(c, gamma)
        assert hard <= soft <= hard + gamma * (4 + 5) * math.log(3)
        gaps.append(soft - hard)
    assert gaps[0] > gaps[1] > gaps[2]


@given(matrices, gammas)
def test_soft_score_bounds(c, gamma):
    m, n = c.shape
    hard = ordered_match(c).total_score
    soft = soft_forward(c, gamma)
    assert hard - 1e-12 <= soft <= hard + gamma * (m + n) * math.log(3) + 1e-12


def test_tight_bound_on_6x6():
    rng = np.random.default_rng(66)
    for gamma in (0.01, 0.1, 1.0):
        for _ in range(30):
            c = rng.random((6, 6))
            assert abs(soft_forward(c, gamma) - ordered_match(c).total_score) <= 10 * gamma


@given(matrices, gammas)
def test_forward_cells_are_smooth_minima(c, gamma):
    R = _forward_table(c, gamma)
    m, n = c.shape
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            cands = [R[i - 1][j], R[i - 1][j - 1] - c[i - 1, j - 1], R[i][j - 1]]
            assert R[i][j] == pytest.approx(smooth_min(cands, gamma), abs=1e-12)


def test_gradient_matches_fd_on_3x4():
    c = np.random.default_rng(34).random((3, 4))
    g = soft_backward(c, 0.1).grad_cost
    fd = central_fd(lambda x: soft_forward(x, 0.1), c)
    assert relative_error(g, fd, FD_FLOOR) <= 1e-4


@given(matrices, gammas)
def test_alignment_is_soft_one_to_one(c, gamma):
    res = soft_backward(c, gamma)
    assert res.soft_score == soft_forward(c, gamma)
    assert np.all(res.alignment >= 0) and np.all(res.alignment <= 1)
    assert np.all(res.alignment.sum(axis=0) <= 1 + 1e-9)
    assert np.all(res.alignment.sum(axis=1) <= 1 + 1e-9)
    # alignment is the gradient, clipped only against rounding past [0, 1]
    np.testing.assert_allclose(res.alignment, res.grad_cost, rtol=0, atol=1e-12)
    assert np.all(res.grad_cost.sum(axis=0) <= 1 + 1e-9)


def test_alignment_converges_to_hard_traceback():
    rng = np.random.default_rng(7)
    for _ in range(20):
        c = rng.random((4, 5))
        indicator = np.zeros_like(c)
        for i, j, _ in ordered_match(c).pairs:
            indicator[i, j] = 1.0
        errs = [np.abs(soft_backward(c, g).alignment - indicator).max() for g in (0.1, 1e-2, 1e-4)]
        assert errs[-1] < 1e-3
        assert errs[-1] <= errs[0]


def test_empty_prediction_matrix():
    res = soft_backward(np.zeros((3, 0)), 0.1)
    assert res.soft_score == 0.0 and res.grad_cost.shape == (3, 0)


def _gt(*pairs, duration=10.0):
    return VideoAnnotation("v", duration, tuple(Segment(a, b) for a, b in pairs))


def test_loss_zero_at_perfect_prediction():
    gt = _gt((0, 2), (3, 6))
    loss, grad = soft_match_loss(gt, gt.bounds, gamma=1e-4)
    assert abs(loss) < 1e-3


def test_loss_single_pair_and_fd():
    gt = _gt((0, 2))
    pred = np.array([[1.0, 3.0]])
    loss, grad = soft_match_loss(gt, pred, gamma=1e-4)
    assert loss == pytest.approx(2 / 3, abs=1e-3)
    fd = central_fd(lambda b: soft_match_loss(gt, b, gamma=1e-4)[0], pred)
    assert relative_error(grad, fd, FD_FLOOR) <= 1e-4


def test_loss_flat_when_disjoint():
    gt = _gt((0, 2), (4, 5))
    loss, grad = soft_match_loss(gt, np.array([[7.0, 9.0]]), gamma=1e-3)
    assert loss == pytest.approx(2.0, abs=1e-2)
    assert np.all(grad == 0)


def test_loss_gradient_fd_random():
    rng = np.random.default_rng(12)
    gt = _gt((1, 4), (5, 7), (8, 9.5))
    for _ in range(20):
        starts = rng.uniform(0, 8, size=4)
        pred = np.column_stack([starts, starts + rng.uniform(0.5, 3, size=4)])
        loss, grad = soft_match_loss(gt, pred, gamma=0.1)
        fd = central_fd(lambda b: soft_match_loss(gt, b, gamma=0.1)[0], pred)
        assert relative_error(grad, fd, FD_FLOOR) <= 1e-4


def test_iou_grad_matches_fd_off_kinks():
    rng = np.random.default_rng(5)
    g = np.array([[1.0, 4.0], [5.0, 9.0]])
    for _ in range(30):
        s = rng.uniform(0, 8)
        p = np.array([[s, s + rng.uniform(0.3, 4)]])
        val, ds, de = iou_and_grad(g, p)
        for col, d in ((0, ds), (1, de)):
            def f(x, col=col):
                q = p.copy()
                q[0, col] = x
                return iou_and_grad(g, q)[0]
            h = 1e-6
            fd = (f(p[0, col] + h) - f(p[0, col] - h)) / (2 * h)
            np.testing.assert_allclose(d, fd, atol=1e-6)
