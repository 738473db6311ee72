"""Statistics for comparing optimizers across sampled hyperparameter configurations."""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateSample, InsufficientData, SingularDesign, SingularMatrix
from ..linalg import solve_linear

# (upper bound on p, label), checked in order
P_BUCKETS = [(1e-4, "****"), (1e-3, "***"), (1e-2, "**"), (5e-2, "*"), (1.0, "ns")]


def p_annotation(p):
    """Significance label: ns (0.05, 1], * (0.01, 0.05], ** (0.001, 0.01], *** (1e-4, 1e-3], **** <= 1e-4."""
    for bound, label in P_BUCKETS:
        if p <= bound:
            return label
    return "ns"


def _betacf(a, b, x, eps=1e-15, max_iter=500):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_regularized(a, b, x):
    """I_x(a, b) by continued fraction, using the symmetry I_x(a,b) = 1 - I_{1-x}(b,a)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t, dof):
    if math.isinf(t):
        return 0.0
    return betainc_regularized(dof / 2.0, 0.5, dof / (dof + t * t))


@dataclass(frozen=True)
class WelchResult:
    t: float
    dof: float
    p: float

    @property
    def annotation(self):
        return p_annotation(self.p)


def welch_t_test(sample_a, sample_b):
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise DegenerateSample("each sample needs at least two values")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    diff = a.mean() - b.mean()
    se2 = va / na + vb / nb
    if se2 == 0.0:
        if diff == 0.0:
            return WelchResult(0.0, float(na + nb - 2), 1.0)
        return WelchResult(math.copysign(math.inf, diff), float(na + nb - 2), 0.0)
    t = diff / math.sqrt(se2)
    dof = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return WelchResult(float(t), float(dof), float(student_t_two_sided_p(t, dof)))


@dataclass(frozen=True)
class BootstrapCI:
    lo: float
    hi: float
    point: float

    def overlaps(self, other):
        return self.lo <= other.hi and other.lo <= self.hi


def bootstrap_ci(sample, statistic=np.mean, n_resamples=10_000, level=0.95, seed=0):
    """Percentile bootstrap interval from resampling with replacement."""
    x = np.asarray(sample, dtype=np.float64)
    if x.size < 2:
        raise DegenerateSample("bootstrap needs at least two values")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, x.size, size=(n_resamples, x.size))
    try:
        stats = np.asarray(statistic(x[idx], axis=1), dtype=np.float64)
    except TypeError:
        stats = np.array([statistic(row) for row in x[idx]], dtype=np.float64)
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(stats, [tail, 1.0 - tail])
    return BootstrapCI(float(lo), float(hi), float(statistic(x)))


def top_percentile(values, q=0.25):
    """Indices of entries at or above the (1 - q) linear-interpolation quantile."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise InsufficientData("empty sample")
    threshold = np.quantile(v, 1.0 - q)
    return np.flatnonzero(v >= threshold)


def normalize_by_max(values):
    """Divide by the maximum; returns (values, ok). ok is False when max <= 0."""
    v = np.asarray(values, dtype=np.float64)
    top = np.nanmax(v) if v.size else np.nan
    if not top > 0:
        return v.copy(), False
    return v / top, True


@dataclass
class OlsResult:
    names: list
    coefficients: np.ndarray
    std_errors: np.ndarray
    r_squared: float
    adj_r_squared: float
    f_statistic: float
    n: int

    def table(self):
        return {
            "terms": {name: {"estimate": float(c), "std_error": float(s)}
                      for name, c, s in zip(self.names, self.coefficients, self.std_errors)},
            "r_squared": self.r_squared,
            "adj_r_squared": self.adj_r_squared,
            "f_statistic": self.f_statistic,
            "n": self.n,
        }


def ols_regression(data, response, covariates, standardize=False, interactions=False):
    """Least squares with intercept via the normal equations.

    ``data`` maps column names to equal-length arrays. With ``standardize`` each
    covariate is replaced by (x - mean) / std before interactions are formed,
    matching regression tables written as scale(lr) * scale(eps).
    """
    y = np.asarray(data[response], dtype=np.float64)
    n = y.size
    covariates = list(covariates)
    if n <= len(covariates) + 1:
        raise InsufficientData(f"{n} records cannot support {len(covariates)} covariates")
    cols, names = [np.ones(n)], ["(Intercept)"]
    base = {}
    for name in covariates:
        x = np.asarray(data[name], dtype=np.float64)
        if standardize:
            sd = x.std(ddof=1)
            if sd == 0.0:
                raise SingularDesign(f"covariate {name!r} is constant")
            x = (x - x.mean()) / sd
            label = f"scale({name})"
        else:
            label = name
        base[name] = (x, label)
        cols.append(x)
        names.append(label)
    if interactions:
        for i, a in enumerate(covariates):
            for b in covariates[i + 1:]:
                cols.append(base[a][0] * base[b][0])
                names.append(f"{base[a][1]}:{base[b][1]}")
    x = np.column_stack(cols)
    p = x.shape[1]
    if n < p:
        raise InsufficientData(f"{n} records cannot support {p} terms")
    xtx = x.T @ x
    try:
        beta = solve_linear(xtx, x.T @ y)
        xtx_inv = solve_linear(xtx, np.eye(p))
    except SingularMatrix as exc:
        raise SingularDesign(str(exc)) from None
    resid = y - x @ beta
    rss = float(resid @ resid)
    tss = float(np.sum((y - y.mean()) ** 2))
    dof = n - p
    sigma2 = rss / dof if dof > 0 else float("nan")
    se = np.sqrt(np.maximum(np.diag(xtx_inv) * sigma2, 0.0))
    if tss > 0:
        r2 = 1.0 - rss / tss
    else:
        r2 = 1.0 if rss == 0.0 else 0.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / dof if dof > 0 else float("nan")
    if p > 1 and dof > 0:
        f = ((tss - rss) / (p - 1)) / (rss / dof) if rss > 0 else float("inf")
    else:
        f = float("nan")
    return OlsResult(names, beta, se, float(r2), float(adj), float(f), n)
