"""Truncated lambda-returns, TD errors and the TDprop per-parameter statistic.

Segment layout (single segment, length n):

    rewards      r_t ... r_{t+n-1}                 shape (n,)
    values       v_t ... v_{t+n}                   shape (n+1,)
    value_grads  grad v_t ... grad v_{t+n}         shape (n+1, P)

The batched helpers take a leading batch axis plus a per-sample ``horizon``
h <= n; entries past h are ignored and index h holds the bootstrap value.
A terminal segment zeroes both the bootstrap value and its gradient.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArg


@dataclass(frozen=True, eq=False)
class TrajectorySegment:
    rewards: np.ndarray
    values: np.ndarray
    value_grads: np.ndarray
    gamma: float
    lam: float = 1.0
    terminal: bool = False

    def __post_init__(self):
        r = np.asarray(self.rewards, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        g = np.asarray(self.value_grads, dtype=np.float64)
        if g.ndim == 1:
            g = g[:, None]
        n = r.shape[0]
        if n < 1 or v.shape != (n + 1,) or g.shape[0] != n + 1:
            raise InvalidArg(f"inconsistent lengths: {n} rewards, {v.shape[0]} values, {g.shape[0]} gradients")
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidArg(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidArg(f"lambda must lie in [0, 1], got {self.lam}")
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "value_grads", g)

    @property
    def n(self):
        return self.rewards.shape[0]

    def bootstrapped(self):
        """Values and gradients with the terminal bootstrap zeroed."""
        v, g = self.values, self.value_grads
        if self.terminal:
            v = v.copy()
            g = g.copy()
            v[-1] = 0.0
            g[-1] = 0.0
        return v, g


def _masked(values, grads, terminal, horizon):
    b, n1 = values.shape
    rows = np.arange(b)
    values = values.copy()
    values[rows, horizon] = np.where(terminal, 0.0, values[rows, horizon])
    if grads is not None:
        grads = grads.copy()
        grads[rows, horizon] = np.where(terminal[:, None], 0.0, grads[rows, horizon])
    return values, grads


def batch_errors(rewards, values, grads, gamma, lam, terminal, horizon):
    """Multi-step errors and their parameter gradients for a batch of segments.

    Returns ``(err, grad_err)`` with shapes (B,) and (B, P); ``grad_err`` is
    None when ``grads`` is None.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    b, n = rewards.shape
    horizon = np.broadcast_to(np.asarray(horizon, dtype=np.int64), (b,))
    terminal = np.broadcast_to(np.asarray(terminal, dtype=bool), (b,))
    values, grads = _masked(values, grads, terminal, horizon)
    k = np.arange(n)
    weights = np.power(gamma * lam, k)[None, :] * (k[None, :] < horizon[:, None])
    delta = rewards + gamma * values[:, 1:] - values[:, :-1]
    err = np.sum(weights * delta, axis=1)
    if grads is None:
        return err, None
    step = gamma * grads[:, 1:, :] - grads[:, :-1, :]
    grad_err = np.einsum("bk,bkp->bp", weights, step)
    return err, grad_err


def batch_tdprop_statistic(grad_err, grads):
    """-grad(error) * grad(v_t), elementwise per sample."""
    return -grad_err * grads[:, 0, :]


def _single(seg):
    return (
        seg.rewards[None, :],
        seg.values[None, :],
        seg.value_grads[None, :, :],
        np.array([seg.terminal]),
        np.array([seg.n]),
    )


def one_step_delta(seg, k):
    if not 0 <= k < seg.n:
        raise IndexError(f"step {k} outside segment of length {seg.n}")
    v, _ = seg.bootstrapped()
    return float(seg.rewards[k] + seg.gamma * v[k + 1] - v[k])


def lambda_return(seg):
    v, _ = seg.bootstrapped()
    total = v[0]
    for k in range(1, seg.n + 1):
        total += (seg.gamma * seg.lam) ** (k - 1) * one_step_delta(seg, k - 1)
    return float(total)


def multi_step_error(seg):
    return lambda_return(seg) - float(seg.values[0])


def grad_error(seg):
    r, v, g, term, h = _single(seg)
    _, ge = batch_errors(r, v, g, seg.gamma, seg.lam, term, h)
    return ge[0]


def tdprop_statistic(seg):
    return -grad_error(seg) * seg.value_grads[0]


def expanded_statistic(seg):
    """Per-sample diagonal of the expanded outer product, term by term."""
    _, g = seg.bootstrapped()
    n, gam, lam = seg.n, seg.gamma, seg.lam
    g0 = g[0]
    out = g0 * g0 - lam ** (n - 1) * gam ** n * g[n] * g0
    for k in range(1, n):
        out = out + (gam * lam) ** (k - 1) * (gam * lam - gam) * g[k] * g0
    return out


def expansion_sum_terms(seg):
    """The individual summation terms of the expansion (all exactly 0 at lambda=1)."""
    _, g = seg.bootstrapped()
    gam, lam = seg.gamma, seg.lam
    return [(gam * lam) ** (k - 1) * (gam * lam - gam) * g[k] * g[0] for k in range(1, seg.n)]
