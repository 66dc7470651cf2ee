"""Adam update rule against hand evaluation and a scripted reference trace."""

import numpy as np
import pytest

from comgrl import autodiff as ad
from comgrl.optim import Adam


def test_first_step_with_unit_gradient_moves_by_lr():
    p = ad.parameter(np.zeros((2, 2)))
    p.grad = np.ones((2, 2))
    Adam([p], lr=0.1).step()
    np.testing.assert_allclose(p.values, -0.1, rtol=1e-7)


def test_zero_gradient_leaves_parameter_unchanged():
    p = ad.parameter(np.full((3, 1), 5.0))
    p.grad = np.zeros((3, 1))
    Adam([p], lr=0.5).step()
    np.testing.assert_array_equal(p.values, np.full((3, 1), 5.0))


def test_two_steps_match_scripted_reference_trace():
    rng = np.random.default_rng(11)
    start = rng.standard_normal((3, 4))
    grads = [rng.standard_normal((3, 4)) for _ in range(2)]

    p = ad.parameter(start.copy())
    opt = Adam([p], lr=0.01)
    for g in grads:
        p.grad = g.copy()
        opt.step()

    # Reference: the same adaptive-moment recurrence written independently.
    theta, m, v = start.copy(), np.zeros_like(start), np.zeros_like(start)
    b1, b2, eps = 0.9, 0.999, 1e-8
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta = theta - 0.01 * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    np.testing.assert_allclose(p.values, theta, rtol=1e-12)
    assert opt.step_count == 2


def test_missing_gradient_skips_with_warning():
    p = ad.parameter(np.ones((2, 2)))
    q = ad.parameter(np.ones((2, 2)))
    q.grad = np.ones((2, 2))
    opt = Adam([p, q], lr=0.1)
    with pytest.warns(RuntimeWarning, match="no gradient"):
        opt.step()
    np.testing.assert_array_equal(p.values, np.ones((2, 2)))
    assert not np.array_equal(q.values, np.ones((2, 2)))


def test_moment_shapes_match_parameters():
    shapes = [(2, 3), (1, 5), (4, 4)]
    params = [ad.parameter(np.zeros(s)) for s in shapes]
    opt = Adam(params, lr=0.1)
    assert [m.shape for m in opt.m] == shapes
    assert [v.shape for v in opt.v] == shapes


def test_zero_grad_clears_gradients():
    p = ad.parameter(np.ones((2, 2)))
    p.grad = np.ones((2, 2))
    opt = Adam([p], lr=0.1)
    opt.zero_grad()
    assert p.grad is None


def test_weight_decay_pulls_toward_zero():
    p = ad.parameter(np.full((1, 1), 10.0))
    p.grad = np.zeros((1, 1))
    Adam([p], lr=0.1, weight_decay=0.01).step()
    assert p.values[0, 0] < 10.0


def test_rejects_nonpositive_learning_rate():
    with pytest.raises(ValueError, match="learning rate"):
        Adam([], lr=0.0)
