"""Adam optimizer behavior."""

import numpy as np

from agenet.tensor import Tensor
from agenet.optim import Adam


def scalar_adam_trace(grads, lr=0.0005, b1=0.9, b2=0.999, eps=1e-8, theta=1.0):
    """Independent scalar reference of the update rule."""
    m = v = 0.0
    out = [theta]
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        theta = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
        out.append(theta)
    return out


def test_zero_gradient_leaves_parameters_unchanged():
    p = Tensor([1.0, -2.0], requires_grad=True)
    opt = Adam([p])
    p.grad = np.zeros(2)
    opt.step()
    assert np.array_equal(p.data, [1.0, -2.0])


def test_missing_gradient_is_skipped():
    p = Tensor([1.0], requires_grad=True)
    opt = Adam([p])
    opt.step()
    assert np.array_equal(p.data, [1.0])


def test_first_step_magnitude_is_learning_rate_times_sign():
    p = Tensor([1.0, 1.0], requires_grad=True)
    opt = Adam([p], lr=0.0005)
    p.grad = np.array([3.7, -0.01])
    opt.step()
    delta = p.data - 1.0
    # bias-corrected ratio g/sqrt(g^2) collapses to the sign of g
    assert np.allclose(delta, [-0.0005, 0.0005], rtol=1e-6)


def test_two_steps_constant_gradient_decrease_monotonically():
    expected = scalar_adam_trace([1.0, 1.0])
    p = Tensor([1.0], requires_grad=True)
    opt = Adam([p], lr=0.0005)
    trace = [float(p.data[0])]
    for _ in range(2):
        p.grad = np.array([1.0])
        opt.step()
        trace.append(float(p.data[0]))
    assert trace[2] < trace[1] < trace[0]
    assert np.allclose(trace, expected, rtol=1e-12)


def test_step_counter_strictly_increases():
    p = Tensor([0.0], requires_grad=True)
    opt = Adam([p])
    counts = []
    for _ in range(3):
        p.grad = np.array([1.0])
        opt.step()
        counts.append(opt.t)
    assert counts == [1, 2, 3]


def test_moment_shapes_match_parameters():
    params = [Tensor(np.zeros((3, 4)), requires_grad=True),
              Tensor(np.zeros(7), requires_grad=True)]
    opt = Adam(params)
    assert [m.shape for m in opt.m] == [(3, 4), (7,)]
    assert [v.shape for v in opt.v] == [(3, 4), (7,)]


def test_zero_grad_clears_gradients():
    p = Tensor([1.0], requires_grad=True)
    p.grad = np.array([5.0])
    Adam([p]).zero_grad()
    assert p.grad is None
