"""Window counts for H = H0 + V(./t) through the squared operator.

For a window (lam1, lam2) inside a spectral gap, with a = (lam1 + lam2)/2
and b = (lam2 - lam1)/2, the eigenvalues of H in the window are the
eigenvalues of (H - a)^2 below b^2.  Compressed to the Landau levels
q = 0..J the squared operator has blocks

    (Lambda_q - a)^2 delta_{qq'} + (c_q + c_q') T_{qq'}(V) + T_{qq'}(Z),

c_q = Lambda_q - a, Z = V^2.  For radial V everything is diagonal in the
angular momentum alpha and the matrix splits into small blocks, one per
alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import eigencount, landau, levelset
from .errors import DomainError, GapViolationError
from .landau import BasisSlice, LandauModel
from .potentials import Potential, square

DEFAULT_EXTRA_LEVELS = 4
SEPARATION = 1e-9


@dataclass(frozen=True)
class WindowSpec:
    lam1: float
    lam2: float
    nu: int
    a: float
    b: float
    eta0: float
    B: float = 1.0

    @property
    def shift(self):
        return self.b * self.b


def validate_window(model: LandauModel, lam1: float, lam2: float) -> WindowSpec:
    """Locate the gap containing (lam1, lam2) and compute a, b and eta0."""
    if not lam1 < lam2:
        raise DomainError(f"need lam1 < lam2, got ({lam1}, {lam2})")
    B = model.B
    nu = levelset.gap_index(lam1, B)
    below = B * (2 * nu + 1) if nu >= 0 else -math.inf
    above = B * (2 * nu + 3)
    sep = SEPARATION * B
    if lam1 - below < sep or above - lam2 < sep:
        raise GapViolationError(
            f"window ({lam1}, {lam2}) touches a Landau level (B = {B})")
    a = 0.5 * (lam1 + lam2)
    b = 0.5 * (lam2 - lam1)
    return WindowSpec(lam1, lam2, nu, a, b, levelset.eta0(a, B), B)


@dataclass
class TruncatedOperator:
    """Compression of (H - a)^2 to Landau levels 0..J.

    Radial potentials keep one small block per alpha (``alpha_blocks``);
    otherwise ``matrix`` holds the full Hermitian matrix indexed by (q, alpha)
    in q-major order.
    """

    J: int
    slices: list
    window: WindowSpec
    alphas: Optional[np.ndarray] = None
    TV: Optional[np.ndarray] = None  # radial: TV[q, q', alpha index]
    TZ: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None
    ingredients: dict = field(default_factory=dict)

    @property
    def radial(self):
        return self.matrix is None

    def _levels(self):
        B = self.window.B
        return np.array([B * (2 * q + 1) - self.window.a for q in range(self.J + 1)])

    def alpha_blocks(self, J=None, diagonal_only=False):
        """Yield (alpha, Hermitian block) for the radial case."""
        J = self.J if J is None else J
        c = self._levels()[: J + 1]
        for k, alpha in enumerate(self.alphas):
            q0 = max(0, -int(alpha))
            if q0 > J:
                continue
            cq = c[q0:]
            tv = self.TV[q0 : J + 1, q0 : J + 1, k]
            tz = self.TZ[q0 : J + 1, q0 : J + 1, k]
            M = np.diag(cq * cq) + (cq[:, None] + cq[None, :]) * tv + tz
            if diagonal_only:
                M = np.diag(np.diag(M))
            yield int(alpha), M

    def index(self, J=None):
        """(q, alpha) labels of the rows of the full matrix for levels <= J."""
        J = self.J if J is None else J
        return [(s.q, int(a)) for s in self.slices if s.q <= J for a in s.alphas]

    def dense(self, J=None, diagonal_only=False):
        """The full matrix (block-diagonal over alpha in the radial case)."""
        J = self.J if J is None else J
        if not self.radial:
            n = sum(s.size for s in self.slices if s.q <= J)
            M = self.matrix[:n, :n]
            if diagonal_only:
                M = M.copy()
                sizes = [s.size for s in self.slices if s.q <= J]
                starts = np.cumsum([0] + sizes)
                for i in range(len(sizes)):
                    for j in range(len(sizes)):
                        if i != j:
                            M[starts[i]:starts[i + 1], starts[j]:starts[j + 1]] = 0.0
            return M
        labels = self.index(J)
        pos = {lab: i for i, lab in enumerate(labels)}
        M = np.zeros((len(labels), len(labels)))
        for alpha, blk in self.alpha_blocks(J, diagonal_only):
            q0 = max(0, -alpha)
            idx = [pos[(q, alpha)] for q in range(q0, J + 1)]
            M[np.ix_(idx, idx)] = blk
        return M

    def count(self, J=None, diagonal_only=False, verify=True):
        """Eigenvalues below b^2 (inertia count, optionally checked by full eig)."""
        eta = self.window.shift
        fn = eigencount.count_check if verify else eigencount.robust_count_below
        get = (lambda r: r.count_below) if verify else (lambda r: r)
        if self.radial:
            return sum(get(fn(M, eta)) for _, M in self.alpha_blocks(J, diagonal_only))
        return get(fn(self.dense(J, diagonal_only), eta))


def _alpha_max(model, V, Z, t, margin):
    return max(landau.default_alpha_max(model, W, t, margin) for W in (V, Z))


def assemble_L(model: LandauModel, V: Potential, Z: Potential, window: WindowSpec,
               J: int, t: float, margin: float = landau.DEFAULT_MARGIN) -> TruncatedOperator:
    """Truncated squared operator over Landau levels 0..J."""
    if J < window.nu + 1:
        raise DomainError(f"J = {J} must include the level above the window (>= {window.nu + 1})")
    if window.B != model.B:
        raise DomainError("window and model disagree on B")
    amax = _alpha_max(model, V, Z, t, margin)
    slices = [BasisSlice(q, amax, float(t), margin, model.B) for q in range(J + 1)]
    if V.is_radial and Z.is_radial:
        alphas, TV = landau.radial_blocks(model, V, t, J, amax)
        _, TZ = landau.radial_blocks(model, Z, t, J, amax)
        return TruncatedOperator(J, slices, window, alphas, TV, TZ)
    sizes = [s.size for s in slices]
    starts = np.cumsum([0] + sizes)
    M = np.zeros((starts[-1], starts[-1]), dtype=complex)
    c = [model.B * (2 * q + 1) - window.a for q in range(J + 1)]
    ingredients = {}
    for q in range(J + 1):
        for qp in range(q, J + 1):
            tv = landau.assemble_toeplitz(model, q, qp, V, slices[q], slices[qp])
            tz = landau.assemble_toeplitz(model, q, qp, Z, slices[q], slices[qp])
            ingredients[(q, qp)] = (tv, tz)
            blk = (c[q] + c[qp]) * tv.entries + tz.entries
            if q == qp:
                blk = blk + c[q] ** 2 * np.eye(sizes[q])
            M[starts[q]:starts[q + 1], starts[qp]:starts[qp + 1]] = blk
            if qp != q:
                M[starts[qp]:starts[qp + 1], starts[q]:starts[q + 1]] = blk.conj().T
    M = 0.5 * (M + M.conj().T)
    return TruncatedOperator(J, slices, window, matrix=M, ingredients=ingredients)


@dataclass
class WindowCount:
    count: int
    J: int
    t: float
    alpha_max: int
    audit_count: Optional[int] = None
    diagonal_only_count: Optional[int] = None
    verified: bool = False

    @property
    def audit_ok(self):
        return self.audit_count is None or self.audit_count == self.count

    def as_dict(self):
        return {
            "count": self.count,
            "J": self.J,
            "t": self.t,
            "alpha_max": self.alpha_max,
            "audit_count": self.audit_count,
            "audit_ok": self.audit_ok,
            "diagonal_only_count": self.diagonal_only_count,
            "verified": self.verified,
        }


def default_J(window: WindowSpec) -> int:
    return window.nu + DEFAULT_EXTRA_LEVELS


def count_window(model: LandauModel, V: Potential, window: WindowSpec, J: Optional[int] = None,
                 t: float = 1.0, margin: float = landau.DEFAULT_MARGIN,
                 audit: bool = True, verify: bool = True) -> WindowCount:
    """Eigenvalues of H = H0 + V(./t) in the window, via the squared operator.

    The count is the inertia of the assembled matrix shifted by b^2,
    checked against the full eigenvalue list when ``verify`` is set.  The
    truncation audit recounts with twice the alpha margin.
    """
    J = default_J(window) if J is None else J
    Z = square(V)
    op = assemble_L(model, V, Z, window, J, t, margin)
    n = op.count(verify=verify)
    out = WindowCount(n, J, float(t), op.slices[0].alpha_max, verified=verify)
    out.diagonal_only_count = op.count(diagonal_only=True, verify=False)
    if audit:
        wide = assemble_L(model, V, Z, window, J, t, 2.0 * margin)
        out.audit_count = wide.count(verify=False)
    return out


@dataclass
class JConvergence:
    rows: list
    converged: bool
    J_converged: Optional[int]

    @property
    def count(self):
        if self.converged:
            return dict(self.rows)[self.J_converged]
        return self.rows[-1][1]


def j_convergence(model: LandauModel, V: Potential, window: WindowSpec, t: float, J_list,
                  margin: float = landau.DEFAULT_MARGIN, verify: bool = False) -> JConvergence:
    """Counts for each J in J_list; converged when the last three counts agree.

    Compressed counts can only grow with J, so an early plateau may be
    followed by further increments; only the trailing run of equal counts
    is trusted, and ``J_converged`` is the first J of that run.  The
    operator is assembled once at the largest J; smaller J use its
    leading levels, which is exactly the smaller compression.
    """
    J_list = [int(j) for j in J_list]
    if any(b <= a for a, b in zip(J_list, J_list[1:])):
        raise DomainError("J_list must be increasing")
    if not J_list:
        raise DomainError("J_list is empty")
    op = assemble_L(model, V, square(V), window, J_list[-1], t, margin)
    rows = [(J, op.count(J, verify=verify)) for J in J_list]
    last = rows[-1][1]
    run = 0
    while run < len(rows) and rows[-1 - run][1] == last:
        run += 1
    if run >= 3:
        return JConvergence(rows, True, rows[-run][0])
    return JConvergence(rows, False, None)


def single_level_counts(model: LandauModel, V: Potential, window: WindowSpec, t: float,
                        margin: float = landau.DEFAULT_MARGIN):
    """Prediction of the window count from the Toeplitz block of the nearest levels.

    Eigenvalues Lambda_q + mu of the compressions T_q(V) that land in the
    window, for q = nu and nu + 1.
    """
    total = 0
    for q in (window.nu, window.nu + 1):
        if q < 0:
            continue
        slc = BasisSlice.for_potential(model, q, V, t, margin)
        if V.is_radial:
            mu = np.array([v for _, v in landau.radial_toeplitz_eigs(model, q, V, t, slc.alpha_max)])
        else:
            blk = landau.assemble_toeplitz(model, q, q, V, slc, slc)
            mu = eigencount.hermitian_eigenvalues(blk.entries).eigenvalues
        lev = model.B * (2 * q + 1)
        total += int(np.count_nonzero((lev + mu > window.lam1) & (lev + mu < window.lam2)))
    return total
