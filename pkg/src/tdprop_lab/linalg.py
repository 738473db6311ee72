"""Dense small-matrix numerics.

Everything here works on float64 numpy arrays of desk-scale size (dim <= 512).
The solvers are written out by hand instead of calling LAPACK so that each
spectral quantity has a second, independent route in the test suite
(numpy.linalg is used only there).
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NotPositiveDefinite, NotSymmetric, SingularMatrix

MAX_DIM = 512


@dataclass(frozen=True)
class EigenResult:
    eigenvalues: np.ndarray
    method: str  # perron-power-iteration | symmetric-jacobi-rotations | hessenberg-qr

    @property
    def max(self):
        return float(self.eigenvalues[0])

    @property
    def min(self):
        return float(self.eigenvalues[-1])


def _as_matrix(a, name="a"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _as_square(a, name="a"):
    a = _as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def inf_norm(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        return float(np.max(np.abs(a))) if a.size else 0.0
    return float(np.max(np.sum(np.abs(a), axis=1))) if a.size else 0.0


def solve_linear(a, b):
    """Solve ``a @ x = b`` by Gaussian elimination with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides. Raises
    ``SingularMatrix`` when a pivot falls below ``1e-12 * ||a||_inf``.
    """
    a = _as_square(a)
    b = np.asarray(b, dtype=np.float64)
    n = a.shape[0]
    if b.shape[0] != n:
        raise ValueError(f"dimension mismatch: a is {n}x{n}, b has {b.shape[0]} rows")
    vector_rhs = b.ndim == 1
    lu = a.copy()
    x = b.reshape(n, -1).copy()
    tol = 1e-12 * inf_norm(a)
    if n == 0:
        return x.reshape(b.shape)
    if tol == 0.0:
        raise SingularMatrix("zero matrix")

    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) < tol:
            raise SingularMatrix(f"pivot {lu[p, k]:.3e} at column {k} below {tol:.3e}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            x[[k, p]] = x[[p, k]]
        if k + 1 < n:
            m = lu[k + 1:, k] / lu[k, k]
            lu[k + 1:, k:] -= np.outer(m, lu[k, k:])
            x[k + 1:] -= np.outer(m, x[k])

    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - lu[k, k + 1:] @ x[k + 1:]) / lu[k, k]
    return x[:, 0] if vector_rhs else x


def inverse(a):
    a = _as_square(a)
    return solve_linear(a, np.eye(a.shape[0]))


def spectral_radius_nonneg(a, tol=1e-12, max_iter=100_000):
    """Perron root of a componentwise nonnegative matrix by power iteration.

    Starts from the all-ones vector, keeps the iterate on the unit simplex and
    uses ``sum(a @ x)`` as the estimate. Period-p oscillation of the estimate
    (several eigenvalues on the spectral circle) hands over to
    ``spectral_radius_general``.
    """
    a = _as_square(a)
    if np.any(a < 0):
        raise ValueError("matrix has negative entries")
    n = a.shape[0]
    if n == 0:
        return 0.0
    x = np.full(n, 1.0 / n)
    history = []
    est = 0.0
    for it in range(max_iter):
        y = a @ x
        s = float(y.sum())
        if s == 0.0:
            # a^k 1 == 0 for a nonnegative a means a is nilpotent
            return 0.0
        x = y / s
        prev, est = est, s
        if it > 0 and abs(est - prev) < tol * max(1.0, est):
            return est
        history.append(est)
        if it >= 200 and it % 200 == 0 and _is_periodic(history[-64:], tol):
            return spectral_radius_general(a)
    raise NoConvergence(f"power iteration did not converge in {max_iter} iterations", est)


def _is_periodic(h, tol):
    h = np.asarray(h)
    for p in range(2, 9):
        if len(h) < 3 * p:
            break
        if np.all(np.abs(h[p:] - h[:-p]) < 1e3 * tol * max(1.0, abs(h[-1]))):
            return True
    return False


def _round_robin(m):
    """Rounds of disjoint index pairs covering every pair exactly once (m even)."""
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        rounds.append([(players[i], players[m - 1 - i]) for i in range(m // 2)])
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def eigenvalues_symmetric(a, tol=1e-12, max_sweeps=100):
    """All eigenvalues of a symmetric matrix via cyclic Jacobi rotations.

    Rotations are grouped into rounds of disjoint pairs (round-robin ordering)
    so each round is applied as a single orthogonal similarity.
    """
    a = _as_square(a)
    scale = inf_norm(a)
    if inf_norm(a - a.T) > 1e-10 * scale:
        raise NotSymmetric("matrix is not symmetric")
    n = a.shape[0]
    w = 0.5 * (a + a.T)
    fro = float(np.linalg.norm(w)) if n else 0.0
    m = n + (n % 2)
    rounds = _round_robin(m) if n > 1 else []

    def off(w):
        return float(np.sqrt(2.0 * np.sum(np.triu(w, 1) ** 2)))

    sweeps = 0
    while n > 1 and off(w) > tol * fro:
        if sweeps >= max_sweeps:
            raise NoConvergence(f"Jacobi rotations did not converge in {max_sweeps} sweeps")
        for pairs in rounds:
            j = np.eye(n)
            touched = False
            for p, q in pairs:
                if p >= n or q >= n:
                    continue
                apq = w[p, q]
                if abs(apq) <= 1e-300 or abs(apq) < 1e-18 * fro:
                    continue
                theta = (w[q, q] - w[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                j[p, p] = c
                j[q, q] = c
                j[p, q] = s
                j[q, p] = -s
                touched = True
            if touched:
                w = j.T @ w @ j
                w = 0.5 * (w + w.T)
        sweeps += 1

    vals = np.diag(w).copy()
    order = np.lexsort((-vals, -np.abs(vals)))
    return EigenResult(vals[order], "symmetric-jacobi-rotations")


def hessenberg(a):
    """Householder reduction to upper Hessenberg form (similarity transform)."""
    h = _as_square(a).copy()
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k].copy()
        norm = np.linalg.norm(x)
        if norm == 0.0:
            continue
        alpha = -norm if x[0] >= 0 else norm
        v = x
        v[0] -= alpha
        vn = np.linalg.norm(v)
        if vn == 0.0:
            continue
        v /= vn
        h[k + 1:, :] -= 2.0 * np.outer(v, v @ h[k + 1:, :])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v)
        h[k + 2:, k] = 0.0
    return h


def _qr_step(w, mu):
    """One shifted QR sweep on a complex Hessenberg block via Givens rotations."""
    m = w.shape[0]
    w = w - mu * np.eye(m)
    rots = []
    for k in range(m - 1):
        x, y = w[k, k], w[k + 1, k]
        r = np.hypot(abs(x), abs(y))
        if r == 0.0:
            c, s = 1.0 + 0j, 0j
        else:
            c, s = x / r, y / r
        g = np.array([[np.conj(c), np.conj(s)], [-s, c]])
        w[k:k + 2, k:] = g @ w[k:k + 2, k:]
        rots.append(g)
    for k, g in enumerate(rots):
        hi = min(k + 2, m - 1) + 1
        w[:hi, k:k + 2] = w[:hi, k:k + 2] @ g.conj().T
    return w + mu * np.eye(m)


def eigenvalues_general(a, max_iter_per_eig=60):
    """Complex eigenvalues of a general real matrix (Hessenberg + shifted QR)."""
    a = _as_square(a)
    n = a.shape[0]
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds desk-scale limit {MAX_DIM}")
    if n == 0:
        return np.zeros(0, dtype=complex)
    isolated, core = _isolate(a)
    eigs = [complex(v) for v in isolated]
    if core.shape[0]:
        h = hessenberg(core).astype(complex)
        budget = [max_iter_per_eig * core.shape[0]]
        anorm = max(inf_norm(np.abs(h)), 1e-300)
        eigs.extend(_qr_eigs(h, anorm, budget))
    return np.array(eigs, dtype=complex)


def _isolate(a):
    """Peel off eigenvalues exposed by a permutation to block-triangular form.

    A row (or column) whose off-diagonal entries within the active index set
    are all zero can be permuted to the bottom (or top), so its diagonal entry
    is an eigenvalue. Doing this first keeps exact zeros exact, e.g. for
    nilpotent matrices, where shifted QR would only get within sqrt(eps).
    """
    active = list(range(a.shape[0]))
    isolated = []
    changed = True
    while changed and active:
        changed = False
        sub = a[np.ix_(active, active)]
        off = sub != 0.0
        np.fill_diagonal(off, False)
        empty = np.flatnonzero(~off.any(axis=1) | ~off.any(axis=0))
        if empty.size:
            i = int(empty[0])
            isolated.append(sub[i, i])
            del active[i]
            changed = True
    return isolated, a[np.ix_(active, active)]


def _wilkinson_shift(w, its):
    m = w.shape[0]
    p, q, r, s = w[m - 2, m - 2], w[m - 2, m - 1], w[m - 1, m - 2], w[m - 1, m - 1]
    if its % 11 == 0:
        # exceptional shift breaks cycling
        return s + 0.75 * abs(r) * (1 + 1j)
    tr = p + s
    disc = np.sqrt(tr * tr / 4.0 - (p * s - q * r) + 0j)
    mu1, mu2 = tr / 2.0 + disc, tr / 2.0 - disc
    return mu1 if abs(mu1 - s) <= abs(mu2 - s) else mu2


def _qr_eigs(w, anorm, budget):
    eps = np.finfo(float).eps
    eigs = []
    its = 0
    while True:
        m = w.shape[0]
        if m == 1:
            eigs.append(w[0, 0])
            return eigs
        split = None
        for k in range(m - 1, 0, -1):
            scale = abs(w[k - 1, k - 1]) + abs(w[k, k]) or anorm
            if abs(w[k, k - 1]) <= eps * scale:
                split = k
                break
        if split == m - 1:
            eigs.append(w[m - 1, m - 1])
            w = w[:m - 1, :m - 1].copy()
            its = 0
            continue
        if split is not None:
            eigs.extend(_qr_eigs(w[split:, split:].copy(), anorm, budget))
            w = w[:split, :split].copy()
            its = 0
            continue
        if budget[0] <= 0:
            raise NoConvergence("shifted QR iteration cap reached")
        budget[0] -= 1
        its += 1
        w = _qr_step(w, _wilkinson_shift(w, its))


def spectral_radius_general(a):
    """Largest eigenvalue modulus of an arbitrary square matrix."""
    eigs = eigenvalues_general(a)
    return float(np.max(np.abs(eigs))) if eigs.size else 0.0


def eigen_moduli(a):
    vals = np.sort(np.abs(eigenvalues_general(a)))[::-1]
    return EigenResult(vals, "hessenberg-qr")


def condition_number_spd(a):
    """lambda_max / lambda_min of a symmetric positive-definite matrix."""
    res = eigenvalues_symmetric(a)
    lo = float(np.min(res.eigenvalues))
    hi = float(np.max(res.eigenvalues))
    if lo <= 1e-12:
        raise NotPositiveDefinite(f"smallest eigenvalue {lo:.3e} is not positive")
    return hi / lo
