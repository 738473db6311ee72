"""Per-parameter update rules over flat parameter vectors: TDprop, Adam, SGD.

All three take the semi-gradient TD direction ``grad_term = delta * grad v``
and move *along* it (theta <- theta + step), i.e. they ascend the TD
direction. Adam and TDprop differ only in what their second moment tracks:
Adam the squared update direction, TDprop the squared diagonal statistic
``-grad(delta) * grad(v)``.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimMismatch, InvalidArg, NonFiniteInput

KINDS = ("tdprop", "adam", "sgd")


@dataclass(frozen=True)
class Hyperparams:
    alpha: float
    beta1: float = 0.0
    beta2: float = 0.99
    epsilon: float = 1e-3
    grad_clip_norm: float | None = 0.5
    bias_correction: bool = False

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise InvalidArg(f"alpha must be a finite value >= 0, got {self.alpha}")
        if not 0.0 <= self.beta1 < 1.0:
            raise InvalidArg(f"beta1 must lie in [0, 1), got {self.beta1}")
        if not 0.0 <= self.beta2 < 1.0:
            raise InvalidArg(f"beta2 must lie in [0, 1), got {self.beta2}")
        if not self.epsilon > 0:
            raise InvalidArg(f"epsilon must be > 0, got {self.epsilon}")
        if self.grad_clip_norm is not None and not self.grad_clip_norm > 0:
            raise InvalidArg(f"grad_clip_norm must be > 0 or None, got {self.grad_clip_norm}")


@dataclass
class OptimizerState:
    kind: str
    g: np.ndarray
    z: np.ndarray | None
    hp: Hyperparams
    t: int = 0

    @classmethod
    def create(cls, kind, n_params, hp):
        if kind not in KINDS:
            raise InvalidArg(f"unknown optimizer {kind!r}; choose from {KINDS}")
        g = np.zeros(n_params)
        if kind == "tdprop":
            z = np.ones(n_params)
        elif kind == "adam":
            z = np.zeros(n_params)
        else:
            z = None
        return cls(kind, g, z, hp)

    def to_json(self):
        return json.dumps({
            "kind": self.kind,
            "t": self.t,
            "g": self.g.tolist(),
            "z": None if self.z is None else self.z.tolist(),
            "hp": asdict(self.hp),
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        z = None if d["z"] is None else np.asarray(d["z"], dtype=np.float64)
        return cls(d["kind"], np.asarray(d["g"], dtype=np.float64), z, Hyperparams(**d["hp"]), d["t"])


def clip_global_norm(x, max_norm):
    if max_norm is None:
        return x
    norm = float(np.linalg.norm(x))
    if norm > max_norm:
        return x * (max_norm / norm)
    return x


def _check(state, theta, *vectors, kind):
    if state.kind != kind:
        raise InvalidArg(f"state is for {state.kind!r}, not {kind!r}")
    theta = np.asarray(theta, dtype=np.float64)
    out = []
    for v in vectors:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != theta.shape or v.shape != state.g.shape:
            raise DimMismatch(f"shape {v.shape} does not match parameters {theta.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput("non-finite update input")
        out.append(v)
    return theta, out


def tdprop_update(state, theta, grad_term, stat):
    theta, (grad_term, stat) = _check(state, theta, grad_term, stat, kind="tdprop")
    hp = state.hp
    grad_term = clip_global_norm(grad_term, hp.grad_clip_norm)
    state.t += 1
    state.g = hp.beta1 * state.g + (1.0 - hp.beta1) * grad_term
    state.z = hp.beta2 * state.z + (1.0 - hp.beta2) * stat * stat
    return theta + hp.alpha * state.g / (np.sqrt(state.z) + hp.epsilon)


def adam_update(state, theta, grad_term):
    theta, (grad_term,) = _check(state, theta, grad_term, kind="adam")
    hp = state.hp
    grad_term = clip_global_norm(grad_term, hp.grad_clip_norm)
    state.t += 1
    state.g = hp.beta1 * state.g + (1.0 - hp.beta1) * grad_term
    state.z = hp.beta2 * state.z + (1.0 - hp.beta2) * grad_term * grad_term
    g, z = state.g, state.z
    if hp.bias_correction:
        g = g / (1.0 - hp.beta1 ** state.t)
        z = z / (1.0 - hp.beta2 ** state.t)
    return theta + hp.alpha * g / (np.sqrt(z) + hp.epsilon)


def sgd_update(state, theta, grad_term):
    theta, (grad_term,) = _check(state, theta, grad_term, kind="sgd")
    hp = state.hp
    grad_term = clip_global_norm(grad_term, hp.grad_clip_norm)
    state.t += 1
    state.g = hp.beta1 * state.g + (1.0 - hp.beta1) * grad_term
    return theta + hp.alpha * state.g


def step(state, theta, grad_term, stat=None):
    """Dispatch on ``state.kind``; ``stat`` is required for TDprop only."""
    if state.kind == "tdprop":
        if stat is None:
            raise InvalidArg("TDprop needs the diagonal statistic")
        return tdprop_update(state, theta, grad_term, stat)
    if state.kind == "adam":
        return adam_update(state, theta, grad_term)
    return sgd_update(state, theta, grad_term)
