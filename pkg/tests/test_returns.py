import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tdprop_lab.errors import InvalidArg
from tdprop_lab.returns import (
    TrajectorySegment,
    batch_errors,
    expanded_statistic,
    expansion_sum_terms,
    grad_error,
    lambda_return,
    multi_step_error,
    one_step_delta,
    tdprop_statistic,
)


def seg_from(rng, n, p, gamma, lam, terminal=False):
    return TrajectorySegment(rng.normal(size=n), rng.normal(size=n + 1), rng.normal(size=(n + 1, p)),
                             gamma, lam, terminal)


def test_one_step_delta_examples():
    seg = TrajectorySegment([0.5], [0.8, 1.0], np.zeros((2, 1)), 0.9)
    assert one_step_delta(seg, 0) == pytest.approx(0.6)
    term = TrajectorySegment([1.0], [1.0, 5.0], np.zeros((2, 1)), 0.9, terminal=True)
    assert one_step_delta(term, 0) == 0.0
    with pytest.raises(IndexError):
        one_step_delta(seg, 1)


def test_two_term_lambda_return():
    # v_t = 0, delta_t = 1, delta_{t+1} = 2 with gamma=0.9, lam=0.5
    # choose v_{t+1} = 0, r_t = 1, v_{t+2} = 0, r_{t+1} = 2
    seg = TrajectorySegment([1.0, 2.0], [0.0, 0.0, 0.0], np.zeros((3, 1)), 0.9, 0.5)
    assert lambda_return(seg) == pytest.approx(1.9)
    assert multi_step_error(seg) == pytest.approx(1.9)


def test_n1_collapse(rng):
    seg = seg_from(rng, 1, 3, 0.9, 0.3)
    assert lambda_return(seg) == pytest.approx(seg.rewards[0] + 0.9 * seg.values[1])
    assert multi_step_error(seg) == pytest.approx(one_step_delta(seg, 0))


def test_validation():
    with pytest.raises(InvalidArg):
        TrajectorySegment([1.0], [0.0], np.zeros((2, 1)), 0.9)
    with pytest.raises(InvalidArg):
        TrajectorySegment([1.0], [0.0, 0.0], np.zeros((2, 1)), 0.9, lam=1.2)
    with pytest.raises(InvalidArg):
        TrajectorySegment([1.0], [0.0, 0.0], np.zeros((2, 1)), 1.5)


@given(st.integers(1, 8), st.floats(0.0, 1.0), st.booleans(), st.integers(0, 2**31))
def test_telescoping_at_lambda_one(n, gamma, terminal, seed):
    seg = seg_from(np.random.default_rng(seed), n, 2, gamma, 1.0, terminal)
    boot = 0.0 if terminal else seg.values[-1]
    direct = sum(gamma ** k * seg.rewards[k] for k in range(n)) + gamma ** n * boot
    assert lambda_return(seg) == pytest.approx(direct, abs=1e-12)


def test_grad_error_cases():
    g = np.array([[1.0, 2.0], [0.0, 0.0]])
    seg = TrajectorySegment([0.0], [0.0, 0.0], g, 0.9)
    assert grad_error(seg) == pytest.approx([-1.0, -2.0])
    assert tdprop_statistic(seg) == pytest.approx([1.0, 4.0])
    # tabular one-hot: state 0 then state 2 out of 3
    oh = np.eye(3)[[0, 2]]
    tab = TrajectorySegment([0.3], [0.1, 0.2], oh, 0.9)
    assert grad_error(tab) == pytest.approx(0.9 * oh[1] - oh[0])
    stat = tdprop_statistic(tab)
    assert stat[0] == 1.0 and stat[2] == 0.0


@given(st.integers(1, 6), st.floats(0.0, 1.0), st.integers(0, 2**31))
def test_gamma_zero_statistic_is_square(n, lam, seed):
    seg = seg_from(np.random.default_rng(seed), n, 4, 0.0, lam)
    assert tdprop_statistic(seg) == pytest.approx(seg.value_grads[0] ** 2, abs=1e-14)


def test_grad_error_matches_finite_difference_on_linear_values(rng):
    # values linear in theta: v_k = phi_k . theta, so the gradient is phi_k
    n, p = 4, 5
    phi = rng.normal(size=(n + 1, p))
    r = rng.normal(size=n)
    theta = rng.normal(size=p)

    def err(t):
        return multi_step_error(TrajectorySegment(r, phi @ t, phi, 0.95, 0.6))

    fd = np.array([(err(theta + 1e-6 * e) - err(theta - 1e-6 * e)) / 2e-6 for e in np.eye(p)])
    ge = grad_error(TrajectorySegment(r, phi @ theta, phi, 0.95, 0.6))
    assert np.linalg.norm(fd - ge) <= 1e-6 * np.linalg.norm(ge)


@given(st.sampled_from([1, 2, 5]), st.sampled_from([0.0, 0.5, 1.0]), st.floats(0.0, 1.0),
       st.booleans(), st.integers(0, 2**31))
def test_expansion_identity(n, lam, gamma, terminal, seed):
    seg = seg_from(np.random.default_rng(seed), n, 6, gamma, lam, terminal)
    assert np.max(np.abs(expanded_statistic(seg) - tdprop_statistic(seg))) <= 1e-12
    if lam == 1.0:
        assert all(np.all(t == 0.0) for t in expansion_sum_terms(seg))


def test_expansion_n1_form(rng):
    seg = seg_from(rng, 1, 3, 0.8, 0.4)
    g = seg.value_grads
    assert expanded_statistic(seg) == pytest.approx(g[0] * g[0] - 0.8 * g[1] * g[0])


def test_batch_matches_single(rng):
    segs = [seg_from(rng, 3, 4, 0.9, 0.7, terminal=bool(i % 2)) for i in range(5)]
    r = np.stack([s.rewards for s in segs])
    v = np.stack([s.values for s in segs])
    g = np.stack([s.value_grads for s in segs])
    term = np.array([s.terminal for s in segs])
    err, gerr = batch_errors(r, v, g, 0.9, 0.7, term, 3)
    for i, s in enumerate(segs):
        assert err[i] == pytest.approx(multi_step_error(s))
        assert gerr[i] == pytest.approx(grad_error(s))


def test_batch_horizon_masks_tail(rng):
    s = seg_from(rng, 2, 3, 0.9, 1.0)
    r = np.concatenate([s.rewards, [99.0]])[None]
    v = np.concatenate([s.values, [99.0]])[None]
    g = np.concatenate([s.value_grads, np.full((1, 3), 99.0)])[None]
    err, gerr = batch_errors(r, v, g, 0.9, 1.0, np.array([False]), np.array([2]))
    assert err[0] == pytest.approx(multi_step_error(s))
    assert gerr[0] == pytest.approx(grad_error(s))
