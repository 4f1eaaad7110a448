"""Dense Hermitian eigenvalues, inertia counts and counting functions.

Eigenvalues come from Householder reduction to tridiagonal form followed
by the implicit-shift QL iteration.  Counts below a shift use a
Bunch-Kaufman symmetric-indefinite factorization and Sylvester's law of
inertia, so no eigenvalues are needed at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AccuracyError, DegenerateShiftError, DomainError, ShapeError

HERMITIAN_TOL = 1e-10
SHIFT_NUDGE = 1e-10
_BK_ALPHA = (1.0 + math.sqrt(17.0)) / 8.0


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    method: str = "full_eig"
    shift: Optional[float] = None
    count_below: Optional[int] = None

    def __post_init__(self):
        if self.method not in ("full_eig", "inertia"):
            raise ValueError(f"unknown method {self.method!r}")


def _as_hermitian(M):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {M.shape}")
    if M.size == 0:
        return M.astype(float)
    scale = max(1.0, float(np.max(np.abs(M))))
    if float(np.max(np.abs(M - M.conj().T))) > HERMITIAN_TOL * scale:
        raise ShapeError("matrix is not Hermitian")
    H = 0.5 * (M + M.conj().T)
    if np.iscomplexobj(H) and not np.any(H.imag):
        H = H.real
    return H.astype(complex if np.iscomplexobj(H) else float)


# -- Householder + QL ------------------------------------------------------------

def _tridiagonalize(A, want_vectors):
    """A = Q T Q^H with T real symmetric tridiagonal (d, e)."""
    A = A.copy()
    n = A.shape[0]
    Q = np.eye(n, dtype=A.dtype) if want_vectors else None
    sub = np.zeros(max(n - 1, 0), dtype=A.dtype)
    for k in range(n - 2):
        x = A[k + 1 :, k]
        sigma = float(np.linalg.norm(x[1:]))
        if sigma == 0.0:
            sub[k] = x[0]
            continue
        x0 = x[0]
        nx = math.hypot(abs(x0), sigma)
        phase = x0 / abs(x0) if x0 != 0 else 1.0
        alpha = -phase * nx
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        S = A[k + 1 :, k + 1 :]
        p = S @ v
        w = p - np.vdot(v, p) * v
        S -= 2.0 * (np.outer(v, w.conj()) + np.outer(w, v.conj()))
        sub[k] = alpha
        if want_vectors:
            Qs = Q[:, k + 1 :]
            Qs -= 2.0 * np.outer(Qs @ v, v.conj())
    if n >= 2:
        sub[n - 2] = A[n - 1, n - 2]
    diag = np.real(np.diag(A)).astype(float)
    # unitary diagonal rescaling makes the off-diagonal real and nonnegative
    mag = np.abs(sub)
    phases = np.ones(n, dtype=A.dtype)
    for k in range(n - 1):
        ph = sub[k] / mag[k] if mag[k] > 1e-290 else 1.0
        phases[k + 1] = phases[k] * ph
    if want_vectors:
        Q = Q * phases[None, :]
    return diag, mag.astype(float), Q


def _ql_implicit(d, e, Z=None, max_iter=60):
    """Eigenvalues of the symmetric tridiagonal (d, e) in place; rotates Z's columns."""
    n = len(d)
    # off-diagonals below 1e-18 ||T|| are dropped (a perturbation far below rounding)
    floor = 1e-18 * (max(abs(x) for x in d) + max((abs(x) for x in e), default=0.0))
    e = list(e) + [0.0]
    d = list(d)
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) + dd == dd or abs(e[m]) <= floor:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise AccuracyError("QL iteration did not converge", abs(e[l]))
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if Z is not None:
                    zi = Z[:, i].copy()
                    Z[:, i] = c * zi - s * Z[:, i + 1]
                    Z[:, i + 1] = s * zi + c * Z[:, i + 1]
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.array(d)


def hermitian_eigensystem(M):
    """(ascending eigenvalues, unitary matrix of eigenvectors) of Hermitian M."""
    A = _as_hermitian(M)
    n = A.shape[0]
    if n == 0:
        return np.empty(0), np.empty((0, 0))
    if n == 1:
        return np.array([float(np.real(A[0, 0]))]), np.ones((1, 1), dtype=A.dtype)
    d, e, Q = _tridiagonalize(A, True)
    Z = Q.astype(complex) if np.iscomplexobj(Q) else Q.astype(float)
    # rotations act on the real tridiagonal eigenbasis; apply them to Q's columns
    lam = _ql_implicit(d, e, Z)
    order = np.argsort(lam, kind="stable")
    return lam[order], Z[:, order]


def hermitian_eigenvalues(M) -> SpectrumResult:
    """All eigenvalues of Hermitian M, ascending."""
    A = _as_hermitian(M)
    n = A.shape[0]
    if n == 0:
        return SpectrumResult(np.empty(0), "full_eig")
    if n == 1:
        return SpectrumResult(np.array([float(np.real(A[0, 0]))]), "full_eig")
    d, e, _ = _tridiagonalize(A, False)
    lam = np.sort(_ql_implicit(d, e))
    return SpectrumResult(lam, "full_eig")


# -- inertia -----------------------------------------------------------------------

class _Breakdown(Exception):
    pass


def _negative_pivots(A):
    """Number of negative eigenvalues of Hermitian A via Bunch-Kaufman."""
    A = A.copy()
    n = A.shape[0]
    scale = max(float(np.max(np.abs(A), initial=0.0)), 1e-300)
    tiny = 1e-14 * scale
    neg = 0
    k = 0
    while k < n:
        akk = abs(A[k, k].real)
        if k + 1 < n:
            col = np.abs(A[k + 1 :, k])
            r = int(np.argmax(col))
            colmax = float(col[r])
            imax = k + 1 + r
        else:
            colmax = 0.0
            imax = k
        if max(akk, colmax) <= tiny:
            raise _Breakdown
        size = 1
        piv = k
        if akk < _BK_ALPHA * colmax:
            row = np.abs(A[imax, k:imax])
            rowmax = float(np.max(row))
            if imax + 1 < n:
                rowmax = max(rowmax, float(np.max(np.abs(A[imax + 1 :, imax]))))
            if akk * rowmax >= _BK_ALPHA * colmax * colmax:
                pass
            elif abs(A[imax, imax].real) >= _BK_ALPHA * rowmax:
                piv = imax
            else:
                size = 2
                piv = imax
        target = k if size == 1 else k + 1
        if piv != target:
            A[[target, piv], k:] = A[[piv, target], k:]
            A[k:, [target, piv]] = A[k:, [piv, target]]
        if size == 1:
            dk = A[k, k].real
            if abs(dk) <= tiny:
                raise _Breakdown
            if dk < 0:
                neg += 1
            c = A[k + 1 :, k]
            A[k + 1 :, k + 1 :] -= np.outer(c, c.conj()) / dk
            k += 1
        else:
            D = A[k : k + 2, k : k + 2]
            det = (D[0, 0].real * D[1, 1].real - abs(D[1, 0]) ** 2)
            if abs(det) <= tiny * scale:
                raise _Breakdown
            if det < 0:
                neg += 1
            elif D[0, 0].real + D[1, 1].real < 0:
                neg += 2
            C = A[k + 2 :, k : k + 2]
            Dinv = np.array([[D[1, 1], -D[0, 1]], [-D[1, 0], D[0, 0]]]) / det
            A[k + 2 :, k + 2 :] -= C @ Dinv @ C.conj().T
            k += 2
    return neg


def inertia_below(M, eta: float) -> int:
    """Number of eigenvalues of Hermitian M strictly below eta.

    Raises DegenerateShiftError when the factorization breaks down, which
    happens only when eta sits (numerically) on an eigenvalue.
    """
    A = _as_hermitian(M)
    n = A.shape[0]
    if n == 0:
        return 0
    shifted = A - eta * np.eye(n, dtype=A.dtype)
    try:
        return _negative_pivots(shifted)
    except _Breakdown:
        raise DegenerateShiftError(f"shift {eta!r} lies on the spectrum") from None


def robust_count_below(M, eta: float) -> int:
    """inertia_below at eta -/+ 1e-10 (1 + ||M||_F); the two must agree."""
    A = _as_hermitian(M)
    if A.shape[0] == 0:
        return 0
    delta = SHIFT_NUDGE * (1.0 + float(np.linalg.norm(A)))
    lo = inertia_below(A, eta - delta)
    hi = inertia_below(A, eta + delta)
    if lo != hi:
        raise DegenerateShiftError(
            f"count below {eta!r} changes within +/-{delta:.1e} ({lo} vs {hi})")
    return lo


def count_check(M, eta: float) -> SpectrumResult:
    """Inertia count below eta, verified against the full eigenvalue list."""
    count = robust_count_below(M, eta)
    spec = hermitian_eigenvalues(M)
    full = int(np.count_nonzero(spec.eigenvalues < eta))
    if full != count:
        raise AccuracyError(f"inertia count {count} != eigenvalue count {full}", abs(full - count))
    return SpectrumResult(spec.eigenvalues, "inertia", float(eta), count)


# -- counting functions ---------------------------------------------------------------

def counting_functions(spec, lam: float):
    """(n_plus, n_minus): eigenvalues above lam and below -lam."""
    if not lam > 0:
        raise DomainError("counting threshold must be positive")
    ev = np.asarray(spec.eigenvalues if isinstance(spec, SpectrumResult) else spec)
    return int(np.count_nonzero(ev > lam)), int(np.count_nonzero(ev < -lam))


def singular_values(M) -> np.ndarray:
    """Singular values of M, largest first."""
    M = np.asarray(M)
    if M.size == 0:
        return np.empty(0)
    G = M.conj().T @ M if M.shape[0] >= M.shape[1] else M @ M.conj().T
    ev = hermitian_eigenvalues(G).eigenvalues
    return np.sqrt(np.clip(ev, 0.0, None))[::-1]


def n_singular(M, lam: float) -> int:
    """n(lam; M): number of singular values above lam."""
    return int(np.count_nonzero(singular_values(M) > lam))


def kyfan_check(K1, K2, lam1: float, lam2: float):
    """Flags for the three subadditivity inequalities (n_+, n_-, singular values)."""
    K1 = _as_hermitian(K1)
    K2 = _as_hermitian(K2)
    if K1.shape != K2.shape:
        raise ShapeError("matrices must have matching dimensions")
    if not (lam1 > 0 and lam2 > 0):
        raise DomainError("thresholds must be positive")
    s1 = hermitian_eigenvalues(K1)
    s2 = hermitian_eigenvalues(K2)
    s12 = hermitian_eigenvalues(K1 + K2)
    p1, m1 = counting_functions(s1, lam1)
    p2, m2 = counting_functions(s2, lam2)
    p12, m12 = counting_functions(s12, lam1 + lam2)
    # for Hermitian K the singular values are |eigenvalues|
    n = lambda s, lam: int(np.count_nonzero(np.abs(s.eigenvalues) > lam))
    return (
        p12 <= p1 + p2,
        m12 <= m1 + m2,
        n(s12, lam1 + lam2) <= n(s1, lam1) + n(s2, lam2),
    )
