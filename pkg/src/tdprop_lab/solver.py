"""Deterministic preconditioned value iteration and empirical convergence rates."""

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import Diverged, InsufficientData, InvalidArg
from .linalg import inf_norm
from .mdp import exact_value

DIVERGENCE_LIMIT = 1e12
ERROR_FLOOR = 1e-13


@dataclass
class SolveTrace:
    errors: list
    alpha: float
    splitting_kind: str
    iterations: int = 0
    converged: bool = False
    v: np.ndarray = field(default=None, repr=False)


def iterate(sys, s, alpha, v0=None, max_iters=500, tol=0.0, v_star=None):
    """Run ``v <- v - alpha b^{-1}(h v - r_eff)`` and record ``||v - v*||_inf``.

    ``tol=0`` runs the full ``max_iters``. Raises ``Diverged`` (carrying the
    partial trace) once the error exceeds 1e12.
    """
    if alpha < 0:
        raise InvalidArg("alpha must be nonnegative")
    if v_star is None:
        v_star = exact_value(sys.source).v_star
    v = np.zeros(sys.dim) if v0 is None else np.array(v0, dtype=np.float64)
    if v.shape != (sys.dim,):
        raise InvalidArg(f"v0 must have length {sys.dim}")
    trace = SolveTrace([inf_norm(v - v_star)], float(alpha), s.kind)
    if trace.errors[0] <= tol:
        trace.converged = True
        trace.v = v
        return trace
    for t in range(1, max_iters + 1):
        v = v - alpha * s.apply_b_inverse(sys.h @ v - sys.r_eff)
        err = inf_norm(v - v_star)
        trace.errors.append(err)
        trace.iterations = t
        if not np.isfinite(err) or err > DIVERGENCE_LIMIT:
            trace.v = v
            raise Diverged(f"error {err:.3e} at iteration {t}", trace)
        if err <= tol:
            trace.converged = True
            break
    trace.v = v
    return trace


def empirical_rate(trace, burn_in=50):
    """Geometric-mean error ratio after ``burn_in``, stopping at the float floor."""
    errs = np.asarray(trace.errors if isinstance(trace, SolveTrace) else trace, dtype=np.float64)
    usable = np.flatnonzero(errs <= ERROR_FLOOR)
    end = int(usable[0]) - 1 if usable.size else len(errs) - 1
    if end - burn_in < 10:
        raise InsufficientData(f"need at least {burn_in + 10} iterations above the error floor, have {end}")
    return float((errs[end] / errs[burn_in]) ** (1.0 / (end - burn_in)))


def iterations_to_tol(trace, tol):
    for i, e in enumerate(trace.errors):
        if e <= tol:
            return i
    return None


def config_hash(config):
    blob = json.dumps(config, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "error_inf_norm"])
        for i, e in enumerate(trace.errors):
            w.writerow([i, repr(float(e))])
