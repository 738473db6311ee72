"""Action-value functions over a flat parameter vector, with exact gradients.

All three kinds share one batched interface:

    q_values(states, theta=None)            -> (B, A)
    grad_sa(states, actions, theta=None)    -> (B, P)   d Q(s, a) / d theta
    grad_expected(states, probs, theta=None)-> (B, P)   d sum_a pi(a|s) Q(s, a) / d theta, pi held fixed
"""

import numpy as np

from ..errors import InvalidArg


class TabularQ:
    kind = "tabular"

    def __init__(self, n_states, n_actions, theta=None):
        self.n_states, self.n_actions = n_states, n_actions
        self.n_params = n_states * n_actions
        self.theta = np.zeros(self.n_params) if theta is None else np.array(theta, dtype=np.float64)

    def q_values(self, states, theta=None):
        theta = self.theta if theta is None else theta
        return theta.reshape(self.n_states, self.n_actions)[np.asarray(states)]

    def grad_sa(self, states, actions, theta=None):
        states = np.asarray(states)
        g = np.zeros((states.shape[0], self.n_params))
        g[np.arange(states.shape[0]), states * self.n_actions + np.asarray(actions)] = 1.0
        return g

    def grad_expected(self, states, probs, theta=None):
        states = np.asarray(states)
        b = states.shape[0]
        g = np.zeros((b, self.n_states, self.n_actions))
        g[np.arange(b), states] = probs
        return g.reshape(b, self.n_params)

    def copy(self):
        return TabularQ(self.n_states, self.n_actions, self.theta.copy())


class LinearQ:
    """Q(s, a) = w_a . phi(s), one weight block per action."""

    kind = "linear"

    def __init__(self, feature_map, feature_dim, n_actions, theta=None):
        self.feature_map = feature_map
        self.feature_dim, self.n_actions = feature_dim, n_actions
        self.n_params = feature_dim * n_actions
        self.theta = np.zeros(self.n_params) if theta is None else np.array(theta, dtype=np.float64)

    def q_values(self, states, theta=None):
        theta = self.theta if theta is None else theta
        w = theta.reshape(self.n_actions, self.feature_dim)
        return self.feature_map(states) @ w.T

    def grad_sa(self, states, actions, theta=None):
        phi = self.feature_map(states)
        b = phi.shape[0]
        g = np.zeros((b, self.n_actions, self.feature_dim))
        g[np.arange(b), np.asarray(actions)] = phi
        return g.reshape(b, self.n_params)

    def grad_expected(self, states, probs, theta=None):
        phi = self.feature_map(states)
        return (probs[:, :, None] * phi[:, None, :]).reshape(phi.shape[0], self.n_params)

    def copy(self):
        return LinearQ(self.feature_map, self.feature_dim, self.n_actions, self.theta.copy())


class MlpQ:
    """One tanh hidden layer shared by per-action linear output heads.

    Parameter layout: W1 (H x D), b1 (H), W2 (A x H), b2 (A).
    """

    kind = "mlp"

    def __init__(self, feature_map, input_dim, hidden_dim, n_actions, theta=None, seed=0):
        self.feature_map = feature_map
        self.input_dim, self.hidden_dim, self.n_actions = input_dim, hidden_dim, n_actions
        d, h, a = input_dim, hidden_dim, n_actions
        self._sizes = [h * d, h, a * h, a]
        self.n_params = sum(self._sizes)
        if theta is None:
            rng = np.random.default_rng(seed)
            theta = np.concatenate([
                rng.normal(0.0, 1.0 / np.sqrt(d), h * d),
                np.zeros(h),
                rng.normal(0.0, 0.1 / np.sqrt(h), a * h),
                np.zeros(a),
            ])
        self.theta = np.array(theta, dtype=np.float64)

    def unpack(self, theta=None):
        theta = self.theta if theta is None else theta
        d, h, a = self.input_dim, self.hidden_dim, self.n_actions
        w1, b1, w2, b2 = np.split(theta, np.cumsum(self._sizes)[:-1])
        return w1.reshape(h, d), b1, w2.reshape(a, h), b2

    def _forward(self, states, theta):
        w1, b1, w2, b2 = self.unpack(theta)
        x = self.feature_map(states)
        hid = np.tanh(x @ w1.T + b1)
        return x, hid, hid @ w2.T + b2

    def q_values(self, states, theta=None):
        return self._forward(states, theta)[2]

    def _grad_weighted(self, states, weights, theta):
        # gradient of sum_a weights[b, a] * Q(s_b, a)
        w1, b1, w2, b2 = self.unpack(theta)
        x, hid, _ = self._forward(states, theta)
        back = (weights @ w2) * (1.0 - hid * hid)  # (B, H)
        g_w1 = back[:, :, None] * x[:, None, :]
        g_w2 = weights[:, :, None] * hid[:, None, :]
        b = x.shape[0]
        return np.concatenate([g_w1.reshape(b, -1), back, g_w2.reshape(b, -1), weights], axis=1)

    def grad_sa(self, states, actions, theta=None):
        b = np.asarray(states).shape[0]
        onehot = np.zeros((b, self.n_actions))
        onehot[np.arange(b), np.asarray(actions)] = 1.0
        return self._grad_weighted(states, onehot, theta)

    def grad_expected(self, states, probs, theta=None):
        return self._grad_weighted(states, np.asarray(probs, dtype=np.float64), theta)

    def copy(self):
        return MlpQ(self.feature_map, self.input_dim, self.hidden_dim, self.n_actions, self.theta.copy())


def mlp_value_and_grad(q, s, a, theta=None):
    if q.kind != "mlp":
        raise InvalidArg("mlp_value_and_grad needs an MlpQ")
    value = float(q.q_values(np.array([s]), theta)[0, a])
    return value, q.grad_sa(np.array([s]), np.array([a]), theta)[0]


def make_q(kind, env, seed=0, hidden_dim=16):
    if kind == "tabular":
        return TabularQ(env.n_states, env.n_actions)
    if kind == "linear":
        return LinearQ(env.features, env.feature_dim, env.n_actions)
    if kind == "mlp":
        return MlpQ(env.features, env.feature_dim, hidden_dim, env.n_actions, seed=seed)
    raise InvalidArg(f"unknown Q-function kind {kind!r}; choose tabular, linear or mlp")
