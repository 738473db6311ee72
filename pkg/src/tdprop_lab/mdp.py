"""Tabular Markov reward processes (policy already folded into P and r).

Random instances are drawn with numpy's PCG64 generator, whose output stream
is fixed across platforms for a given integer seed.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArg, NoConvergence
from .linalg import inf_norm, solve_linear


@dataclass(frozen=True, eq=False)
class Mdp:
    p: np.ndarray
    r: np.ndarray
    gamma: float

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64)
        r = np.array(self.r, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise InvalidArg(f"p must be square, got shape {p.shape}")
        if r.shape != (p.shape[0],):
            raise InvalidArg(f"r must have length {p.shape[0]}, got shape {r.shape}")
        if not (0.0 < self.gamma < 1.0):
            raise InvalidArg(f"gamma must lie in (0, 1), got {self.gamma}")
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(p)):
            raise InvalidArg("p and r must be finite")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise InvalidArg("transition probabilities must lie in [0, 1]")
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-12:
            raise InvalidArg("rows of p must sum to 1")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_states(self):
        return self.p.shape[0]

    def to_dict(self):
        return {"gamma": self.gamma, "r": self.r.tolist(), "p": self.p.tolist()}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return cls(p=np.asarray(d["p"], dtype=np.float64), r=np.asarray(d["r"], dtype=np.float64), gamma=d["gamma"])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ExactSolution:
    v_star: np.ndarray
    residual: float


def random_mdp(seed, n_states, branching, gamma=0.9):
    """Sparse random MRP: ``branching`` successors per row with Dirichlet(1) weights."""
    if n_states < 2:
        raise InvalidArg("n_states must be >= 2")
    if not 1 <= branching <= n_states:
        raise InvalidArg("branching must lie in [1, n_states]")
    rng = np.random.default_rng(seed)
    p = np.zeros((n_states, n_states))
    for i in range(n_states):
        cols = rng.choice(n_states, size=branching, replace=False)
        w = rng.exponential(size=branching)
        # exponential draws can underflow to exactly 0 only with negligible probability
        w = np.maximum(w, 1e-12)
        p[i, cols] = w / w.sum()
    p /= p.sum(axis=1, keepdims=True)
    r = rng.uniform(0.0, 1.0, size=n_states)
    return Mdp(p, r, gamma)


def sinkhorn(a, tol=1e-12, max_sweeps=10_000):
    """Alternate row/column normalisation until both sums are within ``tol`` of 1."""
    a = np.array(a, dtype=np.float64)
    for _ in range(max_sweeps):
        a /= a.sum(axis=1, keepdims=True)
        a /= a.sum(axis=0, keepdims=True)
        if np.max(np.abs(a.sum(axis=1) - 1.0)) <= tol:
            return a
    raise NoConvergence(f"Sinkhorn balancing did not converge in {max_sweeps} sweeps")


def symmetric_mdp(seed, n_states, gamma=0.9):
    """MRP with symmetric, doubly stochastic P, so I - gamma P is SPD."""
    if n_states < 2:
        raise InvalidArg("n_states must be >= 2")
    rng = np.random.default_rng(seed)
    m = rng.uniform(0.05, 1.0, size=(n_states, n_states))
    p = sinkhorn(0.5 * (m + m.T))
    p = 0.5 * (p + p.T)
    r = rng.uniform(0.0, 1.0, size=n_states)
    return Mdp(p, r, gamma)


def chain_mdp(n_states, p_left, p_right, gamma=0.9):
    """Birth-death random walk with absorbing ends.

    Interior states move left/right with the given probabilities and stay put
    otherwise. The expected reward of a state is the probability of stepping
    into the right terminal (reward 1 on that transition).
    """
    if n_states < 3:
        raise InvalidArg("n_states must be >= 3")
    if p_left < 0 or p_right < 0 or p_left + p_right > 1.0:
        raise InvalidArg("need p_left, p_right >= 0 and p_left + p_right <= 1")
    p = np.zeros((n_states, n_states))
    p[0, 0] = 1.0
    p[-1, -1] = 1.0
    for i in range(1, n_states - 1):
        p[i, i - 1] = p_left
        p[i, i + 1] = p_right
        p[i, i] = 1.0 - p_left - p_right
    r = np.zeros(n_states)
    r[n_states - 2] = p_right
    return Mdp(p, r, gamma)


def bellman_residual(m, v):
    return inf_norm(m.r + m.gamma * (m.p @ v) - v)


def exact_value(m):
    h = np.eye(m.n_states) - m.gamma * m.p
    v = solve_linear(h, m.r)
    return ExactSolution(v, bellman_residual(m, v))


def sample_instances(seed, count, n_states, gammas, symmetric=False):
    """Yield ``(instance_seed, Mdp)`` pairs from one seeded stream.

    ``n_states`` is an int or an inclusive ``(lo, hi)`` range; gammas cycle
    with the instance index. Random instances also draw their branching
    factor uniformly from [1, |S|].
    """
    lo, hi = (n_states, n_states) if isinstance(n_states, int) else n_states
    if lo < 2 or hi < lo:
        raise InvalidArg(f"bad state-count range {n_states!r}")
    gammas = list(gammas)
    if not gammas:
        raise InvalidArg("need at least one gamma")
    rng = np.random.default_rng(seed)
    for i in range(count):
        n = int(rng.integers(lo, hi + 1))
        branching = int(rng.integers(1, n + 1))
        inst_seed = int(rng.integers(2**31))
        gamma = gammas[i % len(gammas)]
        if symmetric:
            yield inst_seed, symmetric_mdp(inst_seed, n, gamma)
        else:
            yield inst_seed, random_mdp(inst_seed, n, branching, gamma)
