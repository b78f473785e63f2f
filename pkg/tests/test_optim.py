"""SGD update rule: clipping, weight decay, momentum, schedule."""

import numpy as np
import pytest

from earlygesture.errors import ConfigError
from earlygesture.optim import SgdConfig, SgdOptimizer
from earlygesture.tensor import Tensor


def make(value, grad):
    p = Tensor(np.array([value]), requires_grad=True)
    p.grad = np.array([grad])
    return p


def test_large_gradient_clipped_before_update():
    p = make(0.0, 100.0)
    opt = SgdOptimizer({"p": p}, SgdConfig(learning_rate=1.0, momentum=0.0,
                                           weight_decay=0.0))
    opt.step(epoch=0)
    # Clip bound is 10, so the update is exactly -lr * 10.
    assert np.allclose(p.data, [-10.0])


def test_zero_grad_zero_decay_leaves_param():
    p = make(1.5, 0.0)
    opt = SgdOptimizer({"p": p}, SgdConfig(weight_decay=0.0))
    opt.step(epoch=0)
    assert np.allclose(p.data, [1.5])


def test_two_momentum_steps_match_hand_unrolled_recurrence():
    lr, mom, wd = 0.1, 0.9, 0.005
    grads = [0.5, 0.3]
    p = make(1.0, grads[0])
    opt = SgdOptimizer({"p": p}, SgdConfig(learning_rate=lr, momentum=mom,
                                           weight_decay=wd, decay_interval=100))
    # Independent scalar recurrence: clip, add decay, advance velocity, move.
    value, velocity = 1.0, 0.0
    for g in grads:
        g_eff = min(max(g, -10.0), 10.0) + wd * value
        velocity = mom * velocity + g_eff
        value = value - lr * velocity
    opt.step(epoch=0)
    p.grad = np.array([grads[1]])
    opt.step(epoch=0)
    assert p.data[0] == value


def test_learning_rate_schedule_drops_by_factor():
    opt = SgdOptimizer({}, SgdConfig(learning_rate=0.001, decay_factor=0.1,
                                     decay_interval=20))
    assert opt.learning_rate(0) == 0.001
    assert opt.learning_rate(19) == 0.001
    assert np.isclose(opt.learning_rate(20), 0.0001)
    assert np.isclose(opt.learning_rate(40), 0.00001)


def test_invalid_learning_rate_rejected():
    with pytest.raises(ConfigError):
        SgdConfig(learning_rate=0.0)


def test_state_roundtrip():
    p = make(1.0, 0.2)
    opt = SgdOptimizer({"p": p}, SgdConfig())
    opt.step(epoch=0)
    state = opt.state_dict()
    p2 = make(1.0, 0.2)
    opt2 = SgdOptimizer({"p": p2}, SgdConfig())
    opt2.load_state(state)
    assert opt2.step_count == 1
    assert np.array_equal(opt2.velocity["p"], opt.velocity["p"])
