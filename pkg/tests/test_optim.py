import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tdprop_lab.errors import DimMismatch, InvalidArg, NonFiniteInput
from tdprop_lab.optim import (
    Hyperparams,
    OptimizerState,
    adam_update,
    clip_global_norm,
    sgd_update,
    step,
    tdprop_update,
)


def fresh(kind, n=3, **hp):
    hp.setdefault("grad_clip_norm", None)
    return OptimizerState.create(kind, n, Hyperparams(**hp))


def test_initial_moments():
    assert np.array_equal(fresh("tdprop", alpha=0.1).z, np.ones(3))
    assert np.array_equal(fresh("adam", alpha=0.1).z, np.zeros(3))
    assert fresh("sgd", alpha=0.1).z is None
    with pytest.raises(InvalidArg):
        fresh("rmsprop", alpha=0.1)


def test_tdprop_fixture():
    st_ = fresh("tdprop", 2, alpha=0.1, beta2=0.9, epsilon=0.01)
    th = tdprop_update(st_, np.zeros(2), np.full(2, 0.6), np.array([2.0, -2.0]))
    assert st_.z == pytest.approx([1.3, 1.3], abs=1e-15)
    assert th == pytest.approx(np.full(2, 0.1 * 0.6 / (np.sqrt(1.3) + 0.01)), abs=1e-15)
    assert th[0] == pytest.approx(0.05216, abs=1e-5)


def test_tdprop_zero_stat_decay_and_zero_grad():
    st_ = fresh("tdprop", alpha=0.1, beta2=0.5)
    th = np.ones(3)
    for t in range(1, 6):
        th = tdprop_update(st_, th, np.zeros(3), np.zeros(3))
        assert st_.z == pytest.approx(np.full(3, 0.5 ** t))
    assert np.array_equal(th, np.ones(3))


def test_adam_fixture():
    st_ = fresh("adam", 1, alpha=0.2, beta2=0.9, epsilon=1e-3)
    th = adam_update(st_, np.zeros(1), np.ones(1))
    assert st_.z == pytest.approx([0.1])
    assert th == pytest.approx([0.2 / (np.sqrt(0.1) + 1e-3)])
    assert np.array_equal(adam_update(st_, th, np.zeros(1)), th)


def test_adam_constant_gradient_step_size():
    st_ = fresh("adam", 1, alpha=0.01, beta2=0.9, epsilon=1e-8)
    th = np.zeros(1)
    for _ in range(400):
        prev = th
        th = adam_update(st_, th, np.array([-3.0]))
    assert th - prev == pytest.approx([-0.01], rel=1e-6)


def test_adam_bias_correction_flag():
    st_ = fresh("adam", 1, alpha=0.1, beta2=0.9, epsilon=1e-12, bias_correction=True)
    th = adam_update(st_, np.zeros(1), np.array([2.0]))
    assert th == pytest.approx([0.1], rel=1e-9)


def test_sgd_fixtures():
    st_ = fresh("sgd", 3, alpha=0.5)
    th = sgd_update(st_, np.zeros(3), 0.6 * np.eye(3)[1])
    assert th == pytest.approx([0.0, 0.3, 0.0])
    mom = fresh("sgd", 1, alpha=1.0, beta1=0.9)
    c = np.array([1.0])
    sgd_update(mom, np.zeros(1), c)
    sgd_update(mom, np.zeros(1), c)
    assert mom.g == pytest.approx(0.19 * c)


def test_hyperparam_validation():
    for bad in ({"alpha": -1.0}, {"alpha": 0.1, "epsilon": 0.0}, {"alpha": 0.1, "beta2": 1.0},
                {"alpha": 0.1, "beta1": -0.1}, {"alpha": 0.1, "grad_clip_norm": 0.0}):
        with pytest.raises(InvalidArg):
            Hyperparams(**bad)


def test_input_checks():
    st_ = fresh("tdprop", alpha=0.1)
    with pytest.raises(DimMismatch):
        tdprop_update(st_, np.zeros(3), np.zeros(2), np.zeros(3))
    with pytest.raises(NonFiniteInput):
        tdprop_update(st_, np.zeros(3), np.array([np.nan, 0, 0]), np.zeros(3))
    with pytest.raises(InvalidArg):
        adam_update(st_, np.zeros(3), np.zeros(3))
    with pytest.raises(InvalidArg):
        step(st_, np.zeros(3), np.zeros(3))


def test_clipping():
    v = np.array([3.0, 4.0])
    assert clip_global_norm(v, 0.5) == pytest.approx([0.3, 0.4])
    assert np.array_equal(clip_global_norm(v, 10.0), v)
    assert clip_global_norm(v, None) is v
    st_ = OptimizerState.create("sgd", 2, Hyperparams(alpha=1.0))
    assert sgd_update(st_, np.zeros(2), v) == pytest.approx([0.3, 0.4])


@given(st.floats(0.0, 0.999), st.floats(-5, 5), st.floats(0.0, 3.0), st.integers(1, 60))
def test_ema_closed_form(beta2, s, z0, t):
    st_ = fresh("tdprop", 1, alpha=0.0, beta2=beta2)
    st_.z = np.array([z0])
    for _ in range(t):
        tdprop_update(st_, np.zeros(1), np.zeros(1), np.array([s]))
    assert abs(abs(st_.z[0] - s * s) - beta2 ** t * abs(z0 - s * s)) <= 1e-12 * max(1.0, s * s, z0)
    assert st_.z[0] >= 0


@given(st.sampled_from(["tdprop", "adam"]), st.integers(0, 2**31))
def test_direction_follows_first_moment(kind, seed):
    rng = np.random.default_rng(seed)
    st_ = fresh(kind, 5, alpha=0.3, beta1=0.5)
    th = np.zeros(5)
    for _ in range(3):
        new = step(st_, th, rng.normal(size=5), rng.normal(size=5))
        assert np.all(np.sign(new - th) == np.sign(st_.g))
        assert np.all(st_.z >= 0)
        th = new


def test_state_json_round_trip():
    st_ = fresh("tdprop", 4, alpha=0.1)
    tdprop_update(st_, np.zeros(4), np.ones(4), np.full(4, 0.3))
    back = OptimizerState.from_json(st_.to_json())
    assert back.kind == "tdprop" and back.t == 1 and back.hp == st_.hp
    assert np.array_equal(back.z, st_.z) and np.array_equal(back.g, st_.g)
