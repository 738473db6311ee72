"""TD iteration matrices, their plain and Jacobi splittings, and spectral comparisons.

A TD system is ``h v = r_eff``; a splitting ``h = b - c`` gives the iteration
``v <- v - alpha * b^{-1} (h v - r_eff)`` whose asymptotic rate is
``rho(I - alpha b^{-1} h)``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDiagonal, InvalidArg, NonPositiveSpectrum, NotSymmetric
from .linalg import (
    EigenResult,
    condition_number_spd,
    eigenvalues_general,
    eigenvalues_symmetric,
    inf_norm,
    inverse,
    solve_linear,
    spectral_radius_general,
    spectral_radius_nonneg,
)
from .mdp import Mdp

NONNEG_SLACK = 1e-12
INEQ_SLACK = 1e-10
KAPPA_SLACK = 1e-9


@dataclass(frozen=True)
class Variant:
    kind: str = "td0"  # td0 | nstep | lambda
    n: int = 1
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("td0", "nstep", "lambda"):
            raise InvalidArg(f"unknown variant kind {self.kind!r}")
        if self.kind == "nstep" and self.n < 1:
            raise InvalidArg(f"n-step variant needs n >= 1, got {self.n}")
        if self.kind == "lambda" and not 0.0 <= self.lam <= 1.0:
            raise InvalidArg(f"lambda must lie in [0, 1], got {self.lam}")

    @classmethod
    def parse(cls, text):
        """``td0``, ``nstep:N`` or ``lambda:L``."""
        kind, _, arg = text.partition(":")
        try:
            if kind == "td0" and not arg:
                return cls("td0")
            if kind == "nstep":
                return cls("nstep", n=int(arg))
            if kind == "lambda":
                return cls("lambda", lam=float(arg))
        except ValueError as exc:
            raise InvalidArg(f"bad variant {text!r}: {exc}") from None
        raise InvalidArg(f"bad variant {text!r}; expected td0, nstep:N or lambda:L")

    def __str__(self):
        if self.kind == "nstep":
            return f"nstep:{self.n}"
        if self.kind == "lambda":
            return f"lambda:{self.lam:g}"
        return "td0"


@dataclass(frozen=True, eq=False)
class TdSystem:
    variant: Variant
    h: np.ndarray
    r_eff: np.ndarray
    gamma: float
    source: Mdp

    @property
    def dim(self):
        return self.h.shape[0]


@dataclass(frozen=True, eq=False)
class Splitting:
    b: np.ndarray
    c: np.ndarray
    kind: str  # plain | jacobi
    h: np.ndarray = field(repr=False)

    def apply_b_inverse(self, x):
        if self.kind == "plain":
            return x
        if self.kind == "jacobi":
            d = np.diag(self.b)
            return x / d if x.ndim == 1 else x / d[:, None]
        return solve_linear(self.b, x)


@dataclass(frozen=True)
class RegularityReport:
    is_regular: bool
    min_binv_entry: float
    min_c_entry: float


@dataclass(frozen=True)
class Theorem1Report:
    rho_jacobi: float
    rho_plain: float
    holds: bool


@dataclass(frozen=True)
class Theorem2Report:
    kappa_jacobi: float
    kappa_plain: float
    holds: bool


@dataclass(frozen=True)
class OptimalStep:
    alpha_star: float
    rho_star: float


@dataclass(frozen=True)
class SplittingAnalysis:
    rho_plain: float
    rho_jacobi: float
    alpha_star_plain: float | None
    alpha_star_jacobi: float | None
    kappa_plain: float | None
    kappa_jacobi: float | None
    is_symmetric: bool


def _matrix_power(a, n):
    out = np.eye(a.shape[0])
    for _ in range(n):
        out = out @ a
    return out


def build_system(m, variant=Variant()):
    if isinstance(variant, str):
        variant = Variant.parse(variant)
    n_states = m.n_states
    eye = np.eye(n_states)
    g, p = m.gamma, m.p
    if variant.kind == "td0":
        h = eye - g * p
        r_eff = m.r.copy()
    elif variant.kind == "nstep":
        h = eye - g ** variant.n * _matrix_power(p, variant.n)
        r_eff = np.zeros(n_states)
        term = m.r.copy()
        for _ in range(variant.n):
            r_eff += term
            term = g * (p @ term)
    else:
        a = eye - g * variant.lam * p
        h = solve_linear(a, eye - g * p)
        r_eff = solve_linear(a, m.r)
    return TdSystem(variant, h, r_eff, g, m)


def jacobi_split(sys):
    d = np.diag(sys.h)
    if np.any(d <= 1e-12):
        raise DegenerateDiagonal(f"diagonal entry {d.min():.3e} is not usable for Jacobi scaling")
    b = np.diag(d)
    return Splitting(b, b - sys.h, "jacobi", sys.h)


def plain_split(sys):
    b = np.eye(sys.dim)
    return Splitting(b, b - sys.h, "plain", sys.h)


def verify_regular_splitting(s):
    binv = inverse(s.b)
    min_binv = float(binv.min())
    min_c = float(s.c.min())
    return RegularityReport(min_binv >= -NONNEG_SLACK and min_c >= -NONNEG_SLACK, min_binv, min_c)


def iteration_matrix(s, alpha):
    n = s.h.shape[0]
    return np.eye(n) - alpha * s.apply_b_inverse(s.h)


def iteration_rate(s, alpha, fast_path=True):
    """rho(I - alpha b^{-1} h).

    At ``alpha == 1`` the iteration matrix is ``b^{-1} c``, nonnegative for a
    regular splitting, and the Perron root is found by power iteration.
    """
    if alpha < 0:
        raise InvalidArg("alpha must be nonnegative")
    if alpha == 0:
        return 1.0
    if fast_path and alpha == 1.0:
        mat = s.apply_b_inverse(s.c)
        if mat.min() >= -NONNEG_SLACK * max(1.0, inf_norm(mat)):
            return spectral_radius_nonneg(np.maximum(mat, 0.0))
    return spectral_radius_general(iteration_matrix(s, alpha))


def theorem1_check(m, variant=Variant()):
    sys = build_system(m, variant)
    rho_j = iteration_rate(jacobi_split(sys), 1.0)
    rho_p = iteration_rate(plain_split(sys), 1.0)
    return Theorem1Report(rho_j, rho_p, bool(rho_j <= rho_p + INEQ_SLACK and rho_p < 1.0))


def optimal_alpha(eigs):
    """Step size minimising rho(I - alpha H) for a real, positive spectrum."""
    vals = eigs.eigenvalues if isinstance(eigs, EigenResult) else np.asarray(eigs)
    if np.iscomplexobj(vals):
        if np.max(np.abs(vals.imag)) > 1e-10 * max(1.0, np.max(np.abs(vals))):
            raise NonPositiveSpectrum("spectrum is not real")
        vals = vals.real
    vals = np.asarray(vals, dtype=np.float64)
    if vals.size == 0 or np.any(vals <= 0):
        raise NonPositiveSpectrum("spectrum must be strictly positive")
    lo, hi = float(vals.min()), float(vals.max())
    return OptimalStep(2.0 / (hi + lo), (hi - lo) / (hi + lo))


def is_symmetric(a, tol=1e-10):
    return inf_norm(a - a.T) <= tol * max(1.0, inf_norm(a))


def jacobi_scaled(h):
    """D^{-1/2} h D^{-1/2}, similar to D^{-1} h and symmetric when h is."""
    d = np.sqrt(np.diag(h))
    return h / np.outer(d, d)


def spectrum_plain(sys):
    return eigenvalues_symmetric(sys.h)


def spectrum_jacobi(sys):
    if np.any(np.diag(sys.h) <= 1e-12):
        raise DegenerateDiagonal("non-positive diagonal")
    return eigenvalues_symmetric(jacobi_scaled(sys.h))


def theorem2_check(m, variant=Variant()):
    sys = build_system(m, variant)
    if not is_symmetric(sys.h):
        raise NotSymmetric("H is not symmetric")
    kp = condition_number_spd(sys.h)
    kj = condition_number_spd(jacobi_scaled(sys.h))
    return Theorem2Report(kj, kp, bool(kj <= 2.0 * kp + KAPPA_SLACK))


def _real_positive(vals):
    if np.max(np.abs(vals.imag)) > 1e-10 * max(1.0, np.max(np.abs(vals))):
        return None
    re = vals.real
    return re if np.all(re > 0) else None


def analyze(m, variant=Variant()):
    """Rates at alpha=1, optimal steps and condition numbers for one system."""
    sys = build_system(m, variant)
    plain, jac = plain_split(sys), jacobi_split(sys)
    rho_p = iteration_rate(plain, 1.0)
    rho_j = iteration_rate(jac, 1.0)
    sym = is_symmetric(sys.h)
    a_p = a_j = k_p = k_j = None
    if sym:
        ep, ej = spectrum_plain(sys), spectrum_jacobi(sys)
        if ep.eigenvalues.min() > 1e-12:
            a_p = optimal_alpha(ep).alpha_star
            k_p = condition_number_spd(sys.h)
        if ej.eigenvalues.min() > 1e-12:
            a_j = optimal_alpha(ej).alpha_star
            k_j = condition_number_spd(jacobi_scaled(sys.h))
    else:
        vp = _real_positive(eigenvalues_general(sys.h))
        vj = _real_positive(eigenvalues_general(jac.apply_b_inverse(sys.h)))
        a_p = optimal_alpha(vp).alpha_star if vp is not None else None
        a_j = optimal_alpha(vj).alpha_star if vj is not None else None
    return SplittingAnalysis(rho_p, rho_j, a_p, a_j, k_p, k_j, sym)


ANALYSIS_COLUMNS = [
    "variant", "n", "lambda", "gamma", "n_states", "seed",
    "rho_plain", "rho_jacobi", "alpha_star_plain", "alpha_star_jacobi",
    "kappa_plain", "kappa_jacobi", "theorem1_holds", "theorem2_holds",
]


def analysis_row(variant, gamma, n_states, seed, analysis, theorem1_holds, theorem2_holds=None):
    def fmt(x):
        return "" if x is None else repr(float(x))

    return {
        "variant": variant.kind,
        "n": variant.n if variant.kind == "nstep" else "",
        "lambda": repr(variant.lam) if variant.kind == "lambda" else "",
        "gamma": repr(float(gamma)),
        "n_states": n_states,
        "seed": seed,
        "rho_plain": fmt(analysis.rho_plain),
        "rho_jacobi": fmt(analysis.rho_jacobi),
        "alpha_star_plain": fmt(analysis.alpha_star_plain),
        "alpha_star_jacobi": fmt(analysis.alpha_star_jacobi),
        "kappa_plain": fmt(analysis.kappa_plain),
        "kappa_jacobi": fmt(analysis.kappa_jacobi),
        "theorem1_holds": str(bool(theorem1_holds)).lower(),
        "theorem2_holds": "" if theorem2_holds is None else str(bool(theorem2_holds)).lower(),
    }


def write_analysis_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ANALYSIS_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
