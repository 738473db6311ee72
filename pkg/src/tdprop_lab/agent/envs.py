"""Toy episodic control environments, stepped for a whole batch of actors at once.

Each environment also exposes its exact model (``model()``) so that policies
can be evaluated without sampling.
"""

import numpy as np

from ..errors import InvalidArg


class GridWorld:
    """Deterministic grid; reaching the goal pays ``goal_reward`` and ends the episode."""

    n_actions = 4
    moves = np.array([[0, -1], [0, 1], [-1, 0], [1, 0]])  # up, down, left, right

    def __init__(self, width=5, height=5, goal=None, start=(0, 0), step_reward=-0.01,
                 goal_reward=1.0, max_steps=500):
        if width < 1 or height < 1 or width * height < 2:
            raise InvalidArg("grid needs at least two cells")
        self.width, self.height = width, height
        self.goal = tuple(goal) if goal is not None else (width - 1, height - 1)
        self.start = tuple(start)
        self.step_reward = step_reward
        self.goal_reward = goal_reward
        self.max_steps = max_steps
        self.n_states = width * height
        self.name = f"gridworld:{width}x{height}"

    def _index(self, x, y):
        return y * self.width + x

    @property
    def start_state(self):
        return self._index(*self.start)

    @property
    def goal_state(self):
        return self._index(*self.goal)

    def _next(self, states, actions):
        x = states % self.width
        y = states // self.width
        dx, dy = self.moves[actions, 0], self.moves[actions, 1]
        nx = np.clip(x + dx, 0, self.width - 1)
        ny = np.clip(y + dy, 0, self.height - 1)
        return ny * self.width + nx

    def step(self, states, actions, rng):
        nxt = self._next(np.asarray(states), np.asarray(actions))
        terminal = nxt == self.goal_state
        rewards = np.where(terminal, self.goal_reward, self.step_reward)
        return nxt, rewards.astype(np.float64), terminal

    def model(self):
        """(P[s, a, s'], R[s, a], terminal[s])."""
        s = np.repeat(np.arange(self.n_states), self.n_actions)
        a = np.tile(np.arange(self.n_actions), self.n_states)
        nxt = self._next(s, a)
        p = np.zeros((self.n_states, self.n_actions, self.n_states))
        p[s, a, nxt] = 1.0
        r = np.where(nxt == self.goal_state, self.goal_reward, self.step_reward).reshape(self.n_states, self.n_actions)
        terminal = np.zeros(self.n_states, dtype=bool)
        terminal[self.goal_state] = True
        return p, r, terminal

    def features(self, states):
        return np.eye(self.n_states)[np.asarray(states)]

    @property
    def feature_dim(self):
        return self.n_states


class WindyChain:
    """1-D chain with absorbing ends; each move is reversed with probability ``slip``.

    Entering the right end pays 1, the left end pays 0; both end the episode.
    """

    n_actions = 2  # left, right

    def __init__(self, n=19, slip=0.1, max_steps=500):
        if n < 3:
            raise InvalidArg("chain needs at least 3 states")
        if not 0.0 <= slip <= 1.0:
            raise InvalidArg("slip must lie in [0, 1]")
        self.n_states = n
        self.slip = slip
        self.max_steps = max_steps
        self.start_state = n // 2
        self.name = f"windy_chain:{n}:{slip:g}"

    def step(self, states, actions, rng):
        states = np.asarray(states)
        direction = np.where(np.asarray(actions) == 1, 1, -1)
        flip = rng.random(states.shape[0]) < self.slip
        direction = np.where(flip, -direction, direction)
        nxt = states + direction
        terminal = (nxt == 0) | (nxt == self.n_states - 1)
        rewards = (nxt == self.n_states - 1).astype(np.float64)
        return nxt, rewards, terminal

    def model(self):
        n = self.n_states
        p = np.zeros((n, 2, n))
        r = np.zeros((n, 2))
        for s in range(1, n - 1):
            for a, d in ((0, -1), (1, 1)):
                p[s, a, s + d] += 1.0 - self.slip
                p[s, a, s - d] += self.slip
                r[s, a] = p[s, a, n - 1]
        # terminal rows are never entered as a source; keep them absorbing for completeness
        p[0, :, 0] = 1.0
        p[n - 1, :, n - 1] = 1.0
        terminal = np.zeros(n, dtype=bool)
        terminal[[0, n - 1]] = True
        return p, r, terminal

    def features(self, states):
        return np.eye(self.n_states)[np.asarray(states)]

    @property
    def feature_dim(self):
        return self.n_states


def make_env(spec):
    """``gridworld``, ``gridworld:WxH``, ``windy_chain``, ``windy_chain:N`` or ``windy_chain:N:SLIP``."""
    name, _, rest = spec.partition(":")
    try:
        if name == "gridworld":
            if rest:
                w, h = (int(v) for v in rest.lower().split("x"))
                return GridWorld(w, h)
            return GridWorld()
        if name == "windy_chain":
            parts = rest.split(":") if rest else []
            n = int(parts[0]) if parts else 19
            slip = float(parts[1]) if len(parts) > 1 else 0.1
            return WindyChain(n, slip)
    except ValueError as exc:
        raise InvalidArg(f"bad environment spec {spec!r}: {exc}") from None
    raise InvalidArg(f"unknown environment {spec!r}; expected gridworld[:WxH] or windy_chain[:N[:SLIP]]")
