"""Synchronous n-step Expected SARSA with epsilon-greedy behaviour.

All actors advance ``n`` steps with the same parameters, every stored
(n - i)-step error (lambda = 1) from every actor is reduced into one averaged
update direction and one averaged TDprop statistic, and a single optimizer
step is applied. Actors are stepped as one numpy batch; this is the same as
looping over them in order because they share one seeded generator.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .. import optim
from ..errors import InvalidArg, NonFiniteInput
from ..linalg import solve_linear
from ..optim import Hyperparams, OptimizerState
from ..returns import batch_errors, batch_tdprop_statistic

log = logging.getLogger(__name__)

CURVE_COLUMNS = ["step", "episodes_completed", "avg_return_100ep", "param_norm", "z_min", "z_max"]


@dataclass(frozen=True)
class SarsaConfig:
    n: int = 5
    gamma: float = 0.99
    epsilon_greedy: float = 0.01
    actors: int = 16
    total_steps: int = 100_000
    optimizer: str = "sgd"
    hp: Hyperparams = field(default_factory=lambda: Hyperparams(alpha=0.1))
    seed: int = 0
    reward_clip: bool = False
    all_offsets: bool = True
    log_every: int = 1000
    eval_window: int = 100

    def __post_init__(self):
        if self.n < 1 or self.actors < 1 or self.total_steps < 0:
            raise InvalidArg("n and actors must be >= 1, total_steps >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidArg("gamma must lie in [0, 1]")
        if not 0.0 <= self.epsilon_greedy <= 1.0:
            raise InvalidArg("epsilon_greedy must lie in [0, 1]")
        if self.optimizer not in optim.KINDS:
            raise InvalidArg(f"unknown optimizer {self.optimizer!r}")


def policy_probs(qvals, epsilon):
    """Epsilon-greedy probabilities; ties go to the lowest action index.

    Accepts one row of Q-values or a (B, A) batch.
    """
    qvals = np.asarray(qvals, dtype=np.float64)
    single = qvals.ndim == 1
    qv = np.atleast_2d(qvals)
    n_actions = qv.shape[1]
    probs = np.full(qv.shape, epsilon / n_actions)
    probs[np.arange(qv.shape[0]), np.argmax(qv, axis=1)] += 1.0 - epsilon
    return probs[0] if single else probs


def expected_q(qvals, epsilon):
    probs = policy_probs(qvals, epsilon)
    return np.sum(probs * np.asarray(qvals, dtype=np.float64), axis=-1)


class ActorStreams:
    """Per-actor environment state plus episode bookkeeping."""

    def __init__(self, env, actors, seed):
        self.env = env
        self.rng = np.random.default_rng(seed)
        self.states = np.full(actors, env.start_state, dtype=np.int64)
        self.ep_steps = np.zeros(actors, dtype=np.int64)
        self.ep_returns = np.zeros(actors)
        self.completed = []
        self.total_steps = 0

    @property
    def actors(self):
        return self.states.shape[0]


@dataclass
class RolloutBatch:
    errors: np.ndarray       # (M,)
    grad_v: np.ndarray       # (M, P)  gradient of the anchored Q(s, a)
    stats: np.ndarray        # (M, P)  -grad(error) * grad(Q)
    values: np.ndarray       # (M,)    anchored Q(s, a)
    horizons: np.ndarray     # (M,)
    offsets: np.ndarray      # (M,)
    terminal: np.ndarray     # (M,)

    @property
    def grad_terms(self):
        return self.errors[:, None] * self.grad_v


def _collect(streams, q, n, epsilon):
    env, rng = streams.env, streams.rng
    b = streams.actors
    s_arr = np.empty((b, n), dtype=np.int64)
    a_arr = np.empty((b, n), dtype=np.int64)
    ns_arr = np.empty((b, n), dtype=np.int64)
    r_arr = np.empty((b, n))
    done = np.zeros((b, n), dtype=bool)
    term = np.zeros((b, n), dtype=bool)
    rows = np.arange(b)
    for k in range(n):
        s = streams.states
        qv = q.q_values(s)
        explore = rng.random(b) < epsilon
        rand_a = rng.integers(0, env.n_actions, b)
        a = np.where(explore, rand_a, np.argmax(qv, axis=1))
        nxt, r, terminal = env.step(s, a, rng)
        streams.ep_steps += 1
        streams.ep_returns += r
        truncated = ~terminal & (streams.ep_steps >= env.max_steps)
        ended = terminal | truncated
        s_arr[:, k], a_arr[:, k], ns_arr[:, k], r_arr[:, k] = s, a, nxt, r
        done[:, k], term[:, k] = ended, terminal
        for i in rows[ended]:
            streams.completed.append(float(streams.ep_returns[i]))
        streams.ep_returns[ended] = 0.0
        streams.ep_steps[ended] = 0
        streams.states = np.where(ended, env.start_state, nxt)
    streams.total_steps += b * n
    return s_arr, a_arr, ns_arr, r_arr, done, term


def rollout_and_errors(streams, q, n, gamma, epsilon, reward_clip=False, all_offsets=True):
    """Advance every actor ``n`` steps and build the stored multi-step errors.

    The segment anchored at offset ``i`` runs until the window ends or its
    episode ends, whichever comes first. Terminal endings bootstrap from 0;
    time-limit endings and window endings bootstrap from the expected
    Q-value of the next state under the current epsilon-greedy policy.
    """
    s_arr, a_arr, ns_arr, r_arr, done, term = _collect(streams, q, n, epsilon)
    if reward_clip:
        r_arr = np.clip(r_arr, -1.0, 1.0)
    b = s_arr.shape[0]

    # first episode end at or after each step (n means none inside the window)
    next_end = np.full((b, n), n, dtype=np.int64)
    running = np.full(b, n, dtype=np.int64)
    for k in range(n - 1, -1, -1):
        running = np.where(done[:, k], k, running)
        next_end[:, k] = running

    flat_s, flat_a, flat_ns = s_arr.ravel(), a_arr.ravel(), ns_arr.ravel()
    q_sa = q.q_values(flat_s)[np.arange(b * n), flat_a].reshape(b, n)
    g_sa = q.grad_sa(flat_s, flat_a).reshape(b, n, -1)
    q_ns = q.q_values(flat_ns)
    pi_ns = policy_probs(q_ns, epsilon)
    e_ns = np.sum(pi_ns * q_ns, axis=1).reshape(b, n)
    g_ns = q.grad_expected(flat_ns, pi_ns).reshape(b, n, -1)

    offsets = np.arange(n) if all_offsets else np.array([0])
    actor_idx = np.repeat(np.arange(b), offsets.size)
    off_idx = np.tile(offsets, b)
    end = np.minimum(next_end[actor_idx, off_idx], n - 1)
    horizon = end - off_idx + 1
    seg_terminal = term[actor_idx, end]

    k = np.arange(n + 1)
    pos = np.minimum(off_idx[:, None] + k[None, :], n - 1)
    inside = k[None, :] < horizon[:, None]
    at_boot = k[None, :] == horizon[:, None]
    boot_pos = end

    rewards = np.where(inside[:, :n], r_arr[actor_idx[:, None], pos[:, :n]], 0.0)
    values = np.where(inside, q_sa[actor_idx[:, None], pos], 0.0)
    values = np.where(at_boot, e_ns[actor_idx, boot_pos][:, None], values)
    grads = np.where(inside[:, :, None], g_sa[actor_idx[:, None], pos], 0.0)
    grads = np.where(at_boot[:, :, None], g_ns[actor_idx, boot_pos][:, None, :], grads)

    err, grad_err = batch_errors(rewards, values, grads, gamma, 1.0, seg_terminal, horizon)
    stats = batch_tdprop_statistic(grad_err, grads)
    return RolloutBatch(err, grads[:, 0, :], stats, values[:, 0], horizon, off_idx, seg_terminal)


@dataclass
class TrainResult:
    curve: list
    episode_returns: list
    theta: np.ndarray
    steps: int
    updates: int
    diverged: bool = False

    @property
    def avg_return(self):
        return float(np.mean(self.episode_returns)) if self.episode_returns else float("nan")

    def asymptotic_return(self, window=100):
        if not self.episode_returns:
            return float("nan")
        return float(np.mean(self.episode_returns[-window:]))


def _curve_row(step, streams, theta, opt, window):
    recent = streams.completed[-window:]
    return {
        "step": step,
        "episodes_completed": len(streams.completed),
        "avg_return_100ep": float(np.mean(recent)) if recent else float("nan"),
        "param_norm": float(np.linalg.norm(theta)),
        "z_min": float(opt.z.min()) if opt.z is not None else float("nan"),
        "z_max": float(opt.z.max()) if opt.z is not None else float("nan"),
    }


def train(env, q, cfg):
    """Train a copy of ``q``; deterministic for a given (env, q, cfg)."""
    q = q.copy()
    streams = ActorStreams(env, cfg.actors, cfg.seed)
    opt = OptimizerState.create(cfg.optimizer, q.n_params, cfg.hp)
    curve = []
    next_log = cfg.log_every
    updates = 0
    diverged = False
    while streams.total_steps < cfg.total_steps:
        with np.errstate(over="ignore", invalid="ignore"):
            batch = rollout_and_errors(streams, q, cfg.n, cfg.gamma, cfg.epsilon_greedy,
                                       cfg.reward_clip, cfg.all_offsets)
            grad_term = batch.grad_terms.mean(axis=0)
            stat = batch.stats.mean(axis=0)
            try:
                theta = optim.step(opt, q.theta, grad_term, stat)
            except NonFiniteInput:
                theta = np.full_like(q.theta, np.nan)
        updates += 1
        if not np.all(np.isfinite(theta)):
            log.warning("non-finite parameters after %d updates; stopping run", updates)
            diverged = True
            curve.append(_curve_row(streams.total_steps, streams, q.theta, opt, cfg.eval_window))
            break
        q.theta = theta
        if streams.total_steps >= next_log:
            curve.append(_curve_row(streams.total_steps, streams, q.theta, opt, cfg.eval_window))
            while next_log <= streams.total_steps:
                next_log += cfg.log_every
    if not diverged and (not curve or curve[-1]["step"] != streams.total_steps):
        curve.append(_curve_row(streams.total_steps, streams, q.theta, opt, cfg.eval_window))
    return TrainResult(curve, list(streams.completed), q.theta.copy(), streams.total_steps, updates, diverged)


def write_curve_csv(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CURVE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in curve:
            w.writerow({k: ("" if isinstance(v, float) and np.isnan(v) else (repr(v) if isinstance(v, float) else v))
                        for k, v in row.items()})


def evaluate_policy(env, pi, gamma):
    """Exact Q^pi(s, a) from the environment model; terminal successors contribute 0."""
    p, r, terminal = env.model()
    ns, na = r.shape
    cont = p * (~terminal)[None, None, :]
    # M[(s,a), (s',a')] = P(s'|s,a) * pi(a'|s') for non-terminal s'
    m = (cont[:, :, :, None] * pi[None, None, :, :]).reshape(ns * na, ns * na)
    q = solve_linear(np.eye(ns * na) - gamma * m, r.reshape(-1))
    return q.reshape(ns, na)


def epsilon_greedy_table(qtable, epsilon):
    return policy_probs(qtable, epsilon)


def epsilon_soft_policy_iteration(env, epsilon, gamma, max_iter=200):
    """Best epsilon-greedy policy: returns (Q, pi) with pi epsilon-greedy in Q = Q^pi."""
    p, r, terminal = env.model()
    ns, na = r.shape
    qtab = np.zeros((ns, na))
    # start from a greedy-by-one-step-reward policy
    pi = policy_probs(r, epsilon)
    for _ in range(max_iter):
        qtab = evaluate_policy(env, pi, gamma)
        new_pi = policy_probs(qtab, epsilon)
        if np.array_equal(new_pi, pi):
            return qtab, pi
        pi = new_pi
    raise InvalidArg("epsilon-soft policy iteration did not stabilise")


def optimal_average_return(env, epsilon):
    """Expected undiscounted episode return of the best epsilon-greedy policy."""
    qtab, pi = epsilon_soft_policy_iteration(env, epsilon, 1.0)
    s0 = env.start_state
    return float(pi[s0] @ qtab[s0])


def nonterminal_states(env):
    return np.flatnonzero(~env.model()[2])
