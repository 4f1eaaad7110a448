"""Landau levels, the angular-momentum basis and Toeplitz-type matrices.

Basis functions (symmetric gauge, field B):

    psi_{q,alpha}(x) = sqrt(B/2pi) ell_{q,alpha}(xi) e^{i alpha theta},
    xi = B|x|^2/2,  alpha >= -q.

Matrix elements of a scaled potential V(x/t) reduce to one radial integral
per pair,

    <psi_{q,a}, V psi_{q',a'}> = int ell_{q,a}(xi) ell_{q',a'}(xi) V_{a-a'}(rho/t) dxi,

with V_m the angular Fourier coefficient (1/2pi) int V e^{-i m theta}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import specfun
from .errors import AccuracyError, DomainError, ShapeError
from .potentials import AnnulusStep, Potential, RadialStep, Sum

TWO_PI = 2.0 * math.pi
DEFAULT_MARGIN = 0.25
EXTRA_MODES = 32
PANEL_RTOL = 1e-11
_START_WIDTH = 2.0
_MIN_WIDTH = 0.125
_CHUNK = 512


@dataclass(frozen=True)
class LandauModel:
    B: float = 1.0
    gauge: str = "symmetric"

    def __post_init__(self):
        if not (self.B > 0 and math.isfinite(self.B)):
            raise DomainError("field strength B must be positive and finite")
        if self.gauge != "symmetric":
            raise DomainError("only the symmetric gauge is supported")

    def level(self, q):
        return landau_level(self, q)


def landau_level(model: LandauModel, q: int) -> float:
    """Lambda_q = B(2q + 1)."""
    if q < 0:
        raise DomainError("Landau index must be nonnegative")
    return model.B * (2 * q + 1)


@dataclass(frozen=True)
class BasisSlice:
    """Basis states psi_{q,alpha} with -q <= alpha <= alpha_max at scale t."""

    q: int
    alpha_max: int
    t: float
    margin: float = DEFAULT_MARGIN
    B: float = 1.0

    def __post_init__(self):
        if self.q < 0:
            raise DomainError("Landau index must be nonnegative")
        if not self.t > 0:
            raise DomainError("scale t must be positive")
        if self.alpha_max < -self.q:
            raise DomainError("alpha_max below alpha_min")

    @property
    def alpha_min(self):
        return -self.q

    @property
    def alphas(self):
        return np.arange(self.alpha_min, self.alpha_max + 1)

    @property
    def size(self):
        return self.alpha_max - self.alpha_min + 1

    @classmethod
    def for_potential(cls, model: LandauModel, q: int, V: Potential, t: float,
                      margin: float = DEFAULT_MARGIN):
        return cls(q, default_alpha_max(model, V, t, margin), float(t), margin, model.B)


def default_alpha_max(model: LandauModel, V: Potential, t: float, margin=DEFAULT_MARGIN) -> int:
    """ceil(B (R t)^2 / 2 (1 + margin)) + 32, R the effective support radius."""
    R = V.effective_radius
    return int(math.ceil(model.B * (R * t) ** 2 / 2.0 * (1.0 + margin))) + EXTRA_MODES


@dataclass
class OperatorBlock:
    row_slice: BasisSlice
    col_slice: BasisSlice
    entries: np.ndarray
    hermitian_flag: bool
    width: float = 0.0  # panel width (in sqrt(xi)) that passed the audit

    @property
    def shape(self):
        return self.entries.shape


def basis_function(model: LandauModel, q: int, alpha: int, x1, x2):
    """psi_{q,alpha} evaluated at points (x1, x2)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    xi = 0.5 * model.B * (x1 * x1 + x2 * x2)
    ell = specfun.radial_table(q, [alpha], xi.ravel())[0].reshape(xi.shape)
    return math.sqrt(model.B / TWO_PI) * ell * np.exp(1j * alpha * np.arctan2(x2, x1))


def projection_kernel(model: LandauModel, q: int, x, y) -> complex:
    """Integral kernel of the projection onto the q-th Landau level."""
    B = model.B
    x1, x2 = (np.asarray(c, dtype=float) for c in x)
    y1, y2 = (np.asarray(c, dtype=float) for c in y)
    d2 = (x1 - y1) ** 2 + (x2 - y2) ** 2
    wedge = x1 * y2 - x2 * y1
    val = B / TWO_PI * specfun.laguerre(q, 0, 0.5 * B * d2) * np.exp(-0.25 * B * (d2 + 2j * wedge))
    return complex(val) if np.ndim(val) == 0 else val


# -- quadrature layout ---------------------------------------------------------

def _support(V: Potential):
    """Radial interval (about the origin) outside which V vanishes."""
    if isinstance(V, AnnulusStep) and V.is_radial:
        return V.d1, V.d2
    if isinstance(V, RadialStep):
        nz = [k for k, v in enumerate(V.values) if v != 0.0]
        if not nz:
            return 0.0, 0.0
        return V.breakpoints[nz[0]], V.breakpoints[nz[-1] + 1]
    if isinstance(V, Sum):
        parts = [_support(c) for c in V.children]
        parts = [p for p in parts if p[1] > p[0]]
        if not parts:
            return 0.0, 0.0
        return min(p[0] for p in parts), max(p[1] for p in parts)
    return 0.0, V.effective_radius


def _xi_layout(model: LandauModel, V: Potential, t: float, width: float):
    lo, hi = _support(V)
    s = 0.5 * model.B * t * t
    brk = [s * r * r for r in V.radial_breaks()]
    sing = [s * r * r for r in V.singular_radii()]
    xi, w = specfun.xi_rule(s * lo * lo, s * hi * hi, brk, width, singular=sing)
    rho_over_t = np.sqrt(xi / s) if xi.size else xi
    return xi, w, rho_over_t


def _refine(compute, scale, what):
    """Halve the panel width until two successive results agree."""
    width = _START_WIDTH
    prev = compute(width)
    diff = math.inf
    while width > _MIN_WIDTH:
        width *= 0.5
        cur = compute(width)
        diff = float(np.max(np.abs(cur - prev), initial=0.0))
        tol = PANEL_RTOL * max(scale, float(np.max(np.abs(cur), initial=0.0)), 1e-300)
        if diff <= tol:
            return cur, width
        prev = cur
    raise AccuracyError(f"{what}: panel refinement stalled at {diff:.3e}", diff)


# -- radial potentials ---------------------------------------------------------

def _radial_diag(model, q, qp, V, t, alphas, width):
    # sum_k w_k V(rho_k/t) ell_{q,a} ell_{q',a} for each a
    xi, w, r = _xi_layout(model, V, t, width)
    out = np.zeros(alphas.size)
    if xi.size == 0:
        return out
    wv = w * V.profile(r)
    for s in range(0, alphas.size, _CHUNK):
        a = alphas[s : s + _CHUNK]
        tq = specfun.radial_table(q, a, xi)
        tp = tq if qp == q else specfun.radial_table(qp, a, xi)
        out[s : s + _CHUNK] = (tq * tp) @ wv
    return out


def radial_toeplitz_eigs(model: LandauModel, q: int, V: Potential, t: float, j_max: int):
    """Eigenvalues of P_q V(./t) P_q for radial V, as (j, lambda_j) for j = -q..j_max.

    The operator is diagonal in the angular-momentum basis, so the
    eigenvalues are the diagonal matrix elements.
    """
    if not V.is_radial:
        raise ShapeError("radial_toeplitz_eigs needs a radial potential")
    if j_max < -q:
        raise DomainError("j_max below -q")
    if not t > 0:
        raise DomainError("scale t must be positive")
    js = np.arange(-q, j_max + 1)
    sup = V.norms().sup
    lam, _ = _refine(lambda wd: _radial_diag(model, q, q, V, t, js, wd), sup, "radial eigenvalues")
    if q == 0:
        _gamma_crosscheck(model, V, t, js, lam)
    return list(zip(js.tolist(), lam.tolist()))


def _gamma_crosscheck(model, V, t, js, lam):
    # q = 0 step potentials: lambda_j = sum_shells v (P(j+1, eta2) - P(j+1, eta1))
    if isinstance(V, AnnulusStep):
        shells = [(V.d1, V.d2, V.v)]
    elif isinstance(V, RadialStep):
        b = V.breakpoints
        shells = [(b[k], b[k + 1], v) for k, v in enumerate(V.values) if v != 0.0]
    else:
        return
    s = 0.5 * model.B * t * t
    stride = max(1, js.size // 64)
    for i in range(0, js.size, stride):
        j = int(js[i])
        ref = math.fsum(
            v * (specfun.reg_lower_inc_gamma(j + 1, s * d2 * d2)
                 - specfun.reg_lower_inc_gamma(j + 1, s * d1 * d1))
            for d1, d2, v in shells
        )
        if abs(ref - lam[i]) > 1e-9 * max(1.0, abs(ref)):
            raise AccuracyError(
                f"quadrature and incomplete-gamma values disagree at j={j}: "
                f"{lam[i]!r} vs {ref!r}", abs(ref - lam[i]))


# -- general assembly ------------------------------------------------------------

def _dense_entries(model, q, qp, V, t, ar, ac, width):
    xi, w, r = _xi_layout(model, V, t, width)
    out = np.zeros((ar.size, ac.size), dtype=complex)
    if xi.size == 0:
        return out
    tr = specfun.radial_table(q, ar, xi)
    tc = tr if (qp == q and np.array_equal(ar, ac)) else specfun.radial_table(qp, ac, xi)
    if V.is_radial:
        common, ir, ic = np.intersect1d(ar, ac, return_indices=True)
        wv = w * V.profile(r)
        out[ir, ic] = np.einsum("ik,ik,k->i", tr[ir], tc[ic], wv)
        return out
    m_lo = int(ar[0] - ac[-1])
    m_hi = int(ar[-1] - ac[0])
    m_abs = max(abs(m_lo), abs(m_hi))
    table = V.angular_table(r, m_abs) * w[:, None]  # (K, 2 m_abs + 1)
    for m in range(m_lo, m_hi + 1):
        # pairs (alpha, alpha - m) inside both ranges
        a0 = max(int(ar[0]), int(ac[0]) + m)
        a1 = min(int(ar[-1]), int(ac[-1]) + m)
        if a1 < a0:
            continue
        i = np.arange(a0, a1 + 1) - int(ar[0])
        k = np.arange(a0 - m, a1 - m + 1) - int(ac[0])
        out[i, k] = (tr[i] * tc[k]) @ table[:, m + m_abs]
    return out


def assemble_toeplitz(model: LandauModel, q: int, qp: int, V: Potential,
                      slice_row: BasisSlice, slice_col: BasisSlice) -> OperatorBlock:
    """Dense block <psi_{q,alpha}, V(./t) psi_{q',alpha'}> over the two slices."""
    if slice_row.t != slice_col.t or slice_row.B != slice_col.B or slice_row.B != model.B:
        raise DomainError("slices must share t and the field strength")
    if slice_row.q != q or slice_col.q != qp:
        raise DomainError("slice Landau indices do not match (q, q')")
    t = slice_row.t
    ar = slice_row.alphas
    ac = slice_col.alphas
    sup = V.norms().sup
    M, width = _refine(lambda wd: _dense_entries(model, q, qp, V, t, ar, ac, wd), sup, "assembly")
    herm = q == qp and np.array_equal(ar, ac)
    if herm:
        M = 0.5 * (M + M.conj().T)
    return OperatorBlock(slice_row, slice_col, M, herm, width)


def radial_blocks(model: LandauModel, V: Potential, t: float, J: int, alpha_max: int):
    """T_{q,q'}(V) for radial V as arrays d[q][q'][alpha + J] over alpha = -J..alpha_max.

    Entries with alpha < -min(q, q') are zero (no such basis state).
    """
    if not V.is_radial:
        raise ShapeError("radial_blocks needs a radial potential")
    alphas = np.arange(-J, alpha_max + 1)
    sup = V.norms().sup

    def compute(width):
        xi, w, r = _xi_layout(model, V, t, width)
        out = np.zeros((J + 1, J + 1, alphas.size))
        if xi.size == 0:
            return out
        wv = w * V.profile(r)
        for s in range(0, alphas.size, _CHUNK):
            a = alphas[s : s + _CHUNK]
            tabs = []
            for q in range(J + 1):
                tab = np.zeros((a.size, xi.size))
                ok = a >= -q
                if np.any(ok):
                    tab[ok] = specfun.radial_table(q, a[ok], xi)
                tabs.append(tab)
            for q in range(J + 1):
                for qp in range(q, J + 1):
                    val = np.einsum("ik,ik,k->i", tabs[q], tabs[qp], wv)
                    out[q, qp, s : s + _CHUNK] = val
                    out[qp, q, s : s + _CHUNK] = val
        return out

    blocks, _ = _refine(compute, sup, "radial blocks")
    return alphas, blocks


def assemble_sandwich(model: LandauModel, q: int, W1: Potential, W2: Potential,
                      slc: BasisSlice) -> OperatorBlock:
    """Matrix with the nonzero singular values of W1(./t) P_q conj(W2(./t)).

    With G_i the block of T_q(|W_i|^2), those singular values are the
    singular values of G1^{1/2} G2^{1/2}; the returned block is that
    product.  For W1 = W2 = W it is the block of T_q(|W|^2).
    """
    for W in (W1, W2):
        lo, hi = W.bounds()
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise DomainError("sandwich weights must be bounded")
    G1 = assemble_toeplitz(model, q, q, W1.square(), slc, slc).entries
    if W2 == W1:
        return OperatorBlock(slc, slc, G1, True)
    G2 = assemble_toeplitz(model, q, q, W2.square(), slc, slc).entries
    M = _psd_sqrt(G1) @ _psd_sqrt(G2)
    return OperatorBlock(slc, slc, M, False)


def _psd_sqrt(G):
    if np.count_nonzero(G - np.diag(np.diag(G))) == 0:
        return np.diag(np.sqrt(np.clip(np.diag(G).real, 0.0, None))).astype(G.dtype)
    from .eigencount import hermitian_eigensystem
    w, U = hermitian_eigensystem(G)
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.conj().T


def trace_identities(block: OperatorBlock, V: Potential, t: Optional[float] = None):
    """(trace of the block, t^2 (B/2pi) int V)."""
    if block.row_slice.q != block.col_slice.q:
        raise DomainError("trace needs a diagonal block (q = q')")
    t = block.row_slice.t if t is None else t
    B = block.row_slice.B
    trace = float(np.real(np.trace(block.entries)))
    return trace, t * t * B / TWO_PI * V.integral()
