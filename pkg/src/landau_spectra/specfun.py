"""Special functions and quadrature used by the operator assembly.

Everything here is a pure function of its arguments.  The radial basis
profiles are evaluated in scaled form so that angular momenta in the
thousands (needed once the potential has expanded to t ~ 30) never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import AccuracyError, DomainError

_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 100000


def log_gamma(x):
    """ln Gamma(x) for positive x (scalar or array)."""
    if np.ndim(x) == 0:
        x = float(x)
        if not x > 0:
            raise DomainError(f"log_gamma needs x > 0, got {x}")
        return math.lgamma(x)
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0):
        raise DomainError("log_gamma needs x > 0")
    return gammaln(arr)


def _gamma_series(s, x):
    # P(s, x) by the power series, valid (and fast) for x < s + 1
    term = 1.0 / s
    total = term
    denom = s
    for _ in range(_MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise AccuracyError("incomplete gamma series did not converge")
    return total * math.exp(-x + s * math.log(x) - math.lgamma(s))


def _gamma_cfrac(s, x):
    # Q(s, x) by the modified Lentz continued fraction, for x >= s + 1
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise AccuracyError("incomplete gamma continued fraction did not converge")
    return math.exp(-x + s * math.log(x) - math.lgamma(s)) * h


def reg_lower_inc_gamma(s, x):
    """Regularized lower incomplete gamma P(s, x) = gamma(s, x) / Gamma(s)."""
    s = float(s)
    x = float(x)
    if not s > 0:
        raise DomainError(f"shape s must be positive, got {s}")
    if x < 0:
        raise DomainError(f"x must be nonnegative, got {x}")
    if x == 0.0:
        return 0.0
    if x < s + 1.0:
        return min(1.0, _gamma_series(s, x))
    return max(0.0, 1.0 - _gamma_cfrac(s, x))


def reg_upper_inc_gamma(s, x):
    """Complementary branch Q(s, x) = 1 - P(s, x), computed directly."""
    s = float(s)
    x = float(x)
    if not s > 0:
        raise DomainError(f"shape s must be positive, got {s}")
    if x < 0:
        raise DomainError(f"x must be nonnegative, got {x}")
    if x == 0.0:
        return 1.0
    if x < s + 1.0:
        return max(0.0, 1.0 - _gamma_series(s, x))
    return min(1.0, _gamma_cfrac(s, x))


def laguerre(q, alpha, xi):
    """Generalized Laguerre polynomial L_q^(alpha)(xi) by the degree recurrence.

    ``xi`` may be an array.  ``alpha`` may be negative as long as
    ``alpha + q >= 0``.
    """
    q = int(q)
    if q < 0:
        raise DomainError("degree q must be nonnegative")
    if alpha + q < 0:
        raise DomainError("need alpha + q >= 0")
    xi = np.asarray(xi, dtype=float)
    prev = np.ones_like(xi)
    if q == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - xi
    for n in range(1, q):
        prev, cur = cur, ((2 * n + 1 + alpha - xi) * cur - (n + alpha) * prev) / (n + 1)
    return cur if cur.ndim else float(cur)


@dataclass(frozen=True)
class RadialFunctionParams:
    q: int
    alpha: int
    B: float = 1.0

    def __post_init__(self):
        if self.q < 0:
            raise DomainError("Landau index q must be nonnegative")
        if self.alpha + self.q < 0:
            raise DomainError("need alpha >= -q")
        if not self.B > 0:
            raise DomainError("field strength B must be positive")


def _scaled_radial(q, alpha, xi):
    """ell_{q,alpha}(xi) for alpha >= 0, arrays broadcast as (alpha, xi).

    Runs the Laguerre recurrence on L_n / binom(n + alpha, n), which stays
    O(1) near the oscillation region, and folds every factorial into one
    exponent before exponentiating.
    """
    alpha = np.asarray(alpha, dtype=float)
    xi = np.asarray(xi, dtype=float)
    # factorial terms depend on alpha only: evaluate before broadcasting
    log_norm = 0.5 * (gammaln(q + alpha + 1.0) - gammaln(q + 1.0)) - gammaln(alpha + 1.0)
    with np.errstate(divide="ignore"):
        log_xi = np.log(xi)
    alpha_b, xi_b = np.broadcast_arrays(alpha, xi)
    m_prev = np.ones(alpha_b.shape)
    m_cur = m_prev
    if q >= 1:
        m_cur = (1.0 + alpha - xi) / (1.0 + alpha)
        for n in range(1, q):
            m_prev, m_cur = m_cur, ((2 * n + 1 + alpha - xi) * m_cur - n * m_prev) / (n + 1 + alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pow = np.where(alpha_b == 0.0, 0.0, 0.5 * alpha * log_xi)
        expo = log_norm + log_pow - 0.5 * xi + np.log(np.abs(m_cur))
        out = np.sign(m_cur) * np.exp(expo)
    return np.where(m_cur == 0.0, 0.0, out)


def radial_table(q, alphas, xi):
    """Rows ell_{q,alpha}(xi) for each alpha in ``alphas``.

    Negative alpha = -k uses ell_{q,-k} = (-1)^k ell_{q-k,k}.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=int))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(alphas + q < 0):
        raise DomainError("need alpha >= -q")
    out = np.empty((alphas.size, xi.size))
    pos = alphas >= 0
    if np.any(pos):
        out[pos] = _scaled_radial(q, alphas[pos][:, None], xi[None, :])
    for i in np.flatnonzero(~pos):
        k = -int(alphas[i])
        out[i] = (-1) ** k * _scaled_radial(q - k, float(k), xi)
    return out


def normalized_radial(p: RadialFunctionParams, xi):
    """ell_{q,alpha}(xi) = sqrt(q!/(q+alpha)!) xi^(alpha/2) e^(-xi/2) L_q^(alpha)(xi).

    This is the radial profile of the Landau basis function psi_{q,alpha}
    in the variable xi = B|x|^2/2, without the sqrt(B/2pi) constant and the
    angular phase.  Finite for alpha up to 1e6.
    """
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr < 0):
        raise DomainError("xi must be nonnegative")
    vals = radial_table(p.q, [p.alpha], xi_arr.ravel())[0]
    return vals.reshape(xi_arr.shape) if xi_arr.ndim else float(vals[0])


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple


@lru_cache(maxsize=64)
def _legendre_reference(n):
    # Newton iteration on P_n from the three-term recurrence, all roots at once
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for k in range(2, n + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x = x[order]
    w = w[order]
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n, lo, hi) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [lo, hi]."""
    n = int(n)
    if n < 1:
        raise DomainError("need at least one node")
    if not lo < hi:
        raise DomainError(f"empty interval [{lo}, {hi}]")
    x, w = _legendre_reference(n)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return QuadratureRule(nodes=mid + half * x, weights=half * w, interval=(lo, hi))


def panel_edges(lo, hi, width, breakpoints=()):
    """Panel boundaries on [lo, hi], snapped to interior breakpoints."""
    cuts = sorted({float(lo), float(hi), *(float(b) for b in breakpoints if lo < b < hi)})
    edges = [cuts[0]]
    for a, b in zip(cuts[:-1], cuts[1:]):
        k = max(1, int(math.ceil((b - a) / width)))
        edges.extend(a + (b - a) * np.arange(1, k + 1) / k)
    return np.asarray(edges)


def composite_rule(edges, n=64):
    """Concatenated Gauss-Legendre panels over consecutive ``edges``."""
    x, w = _legendre_reference(n)
    edges = np.asarray(edges, dtype=float)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def graded_cuts(points, lo, hi, width, levels=24):
    """Cuts p +/- width 2^-k around each point, for integrands with
    algebraic (e.g. square-root) singularities there."""
    cuts = []
    for p in points:
        for k in range(1, levels + 1):
            h = width * 0.5**k
            cuts.extend(c for c in (p - h, p + h) if lo < c < hi)
    return cuts


def xi_rule(xi_lo, xi_hi, breakpoints=(), width=1.0, n=64, singular=()):
    """Quadrature nodes/weights for integrals in xi over [xi_lo, xi_hi].

    Panels live in u = sqrt(xi), where every basis product is an entire
    function (no sqrt(xi) branch at the origin); ``width`` is the panel
    width in u.  Panels are snapped to ``breakpoints`` and graded
    geometrically towards the points in ``singular``.  Returns
    (xi_nodes, weights) with sum w f(xi) ~ int f dxi.
    """
    if xi_hi <= xi_lo:
        return np.empty(0), np.empty(0)
    u_lo, u_hi = math.sqrt(xi_lo), math.sqrt(xi_hi)
    sing = [math.sqrt(b) for b in singular if b > 0]
    u_edges = panel_edges(u_lo, u_hi, width,
                          [math.sqrt(b) for b in breakpoints if b > 0] + sing
                          + graded_cuts(sing, u_lo, u_hi, width))
    u, wu = composite_rule(u_edges, n)
    return u * u, 2.0 * u * wu


def adaptive_xi_integral(func, xi_lo, xi_hi, breakpoints=(), rtol=1e-11,
                         width=2.0, max_levels=8, n=64):
    """Integrate ``func(xi)`` (scalar- or array-valued per node) over xi.

    The panel width is halved until two successive refinements agree to
    ``rtol`` relative to the largest magnitude.
    """
    prev = None
    diff = float("inf")
    for _ in range(max_levels):
        xi, w = xi_rule(xi_lo, xi_hi, breakpoints, width, n)
        cur = np.asarray(func(xi)) @ w
        if prev is not None:
            scale = max(np.max(np.abs(cur)), 1e-300)
            diff = float(np.max(np.abs(cur - prev))) / scale
            if diff <= rtol:
                return cur
        prev = cur
        width *= 0.5
    raise AccuracyError(f"panel refinement stalled at relative change {diff:.3e}", diff)
