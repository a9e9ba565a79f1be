import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mscalednn.errors import ConfigError
from mscalednn.optimizer import AdamState, LrSchedule, adam_step, lr_at


def test_lr_examples():
    assert lr_at(LrSchedule(5e-5, 0.0), 123456) == 5e-5
    assert lr_at(LrSchedule(5e-5, 2e-7), 0) == 5e-5
    assert lr_at(LrSchedule(5e-5, 2e-7), 10**6) == pytest.approx(5e-5 / 1.2, rel=1e-15)
    assert lr_at(LrSchedule(5e-5, 2e-7), 10**6) == pytest.approx(4.1667e-5, rel=1e-4)


def test_other_decay_kinds():
    assert lr_at(LrSchedule(1e-3, 1e-3, "linear"), 500) == pytest.approx(5e-4, rel=1e-14)
    assert lr_at(LrSchedule(1e-3, 1e-3, "exponential"), 2) == pytest.approx(1e-3 * 0.999**2, rel=1e-15)
    with pytest.raises(ValueError, match="reaches zero"):
        lr_at(LrSchedule(1e-3, 1e-3, "linear"), 1000)


@pytest.mark.parametrize(
    "args",
    [(0.0,), (-1e-3,), (1e-3, -1.0), (1e-3, 0.1, "cosine"), (1e-3, 1.0, "exponential")],
)
def test_schedule_validation(args):
    with pytest.raises(ConfigError):
        LrSchedule(*args)


def test_negative_step_rejected():
    with pytest.raises(ValueError):
        lr_at(LrSchedule(1e-3), -1)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(1e-8, 1.0),
    st.floats(0.0, 1e-2),
    st.sampled_from(["inverse_time", "exponential"]),
    st.integers(0, 10**6),
    st.integers(0, 10**6),
)
def test_lr_non_increasing(lr0, decay, kind, t1, t2):
    s = LrSchedule(lr0, decay, kind)
    lo, hi = sorted((t1, t2))
    assert lr_at(s, hi) <= lr_at(s, lo)


def _reference_adam(theta, grads, lr_fn, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar Adam written out with Python floats."""
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        theta -= lr_fn(t - 1) * mhat / (math.sqrt(vhat) + eps)
    return theta


def test_first_step_oracle():
    theta = np.zeros(1)
    state = AdamState.zeros_like([theta])
    adam_step(state, [theta], [np.ones(1)], LrSchedule(0.1))
    expected = -0.1 / (1.0 + 1e-8)
    assert abs(theta[0] - expected) <= 1e-12 * abs(expected)
    assert state.t == 1


def test_many_steps_match_reference():
    rng = np.random.default_rng(0)
    grads = rng.normal(size=50)
    sched = LrSchedule(1e-2, 1e-3)
    theta = np.array([0.3])
    state = AdamState.zeros_like([theta])
    for g in grads:
        adam_step(state, [theta], [np.array([g])], sched)
    ref = _reference_adam(0.3, grads, lambda t: lr_at(sched, t))
    assert theta[0] == pytest.approx(ref, rel=1e-12)


def test_zero_gradient_leaves_parameters():
    params = [np.arange(6.0).reshape(2, 3), np.ones(4)]
    before = [p.copy() for p in params]
    state = AdamState.zeros_like(params)
    for _ in range(3):
        adam_step(state, params, [np.zeros_like(p) for p in params], LrSchedule(1e-3))
    assert state.t == 3
    for p, q in zip(params, before):
        assert np.array_equal(p, q)


def test_updates_are_in_place_and_deterministic():
    def run():
        rng = np.random.default_rng(3)
        params = [rng.normal(size=(4, 3)), rng.normal(size=4)]
        views = list(params)
        state = AdamState.zeros_like(params)
        for _ in range(25):
            grads = [rng.normal(size=p.shape) for p in params]
            out, _ = adam_step(state, params, grads, LrSchedule(1e-3, 1e-4))
            assert all(a is b for a, b in zip(out, views))
        return params

    for a, b in zip(run(), run()):
        assert np.array_equal(a, b)


def test_update_magnitude_rail():
    rng = np.random.default_rng(4)
    sched = LrSchedule(1e-3, 1e-2)
    p = rng.normal(size=100)
    state = AdamState.zeros_like([p])
    for _ in range(200):
        before = p.copy()
        lr = lr_at(sched, state.t)
        adam_step(state, [p], [rng.standard_cauchy(size=100)], sched)
        assert np.all(np.abs(p - before) <= 10 * lr)


def test_shape_mismatch():
    p = [np.zeros(3)]
    state = AdamState.zeros_like(p)
    with pytest.raises(ValueError):
        adam_step(state, p, [np.zeros(4)], LrSchedule(1e-3))
    with pytest.raises(ValueError):
        adam_step(state, p, [], LrSchedule(1e-3))
