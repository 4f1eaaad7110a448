"""Level-set areas of potentials and the coefficient series built from them.

The basic quantity is the area of {lam < V < mu}.  Three evaluation paths,
tried in order:

* constant cells (steps, sector tilings and their common refinements),
  summed exactly;
* a single Gaussian, or a radial potential, by inverting the radial
  profile (closed form for the Gaussian, bracketed root finding otherwise);
* a polar grid, with an error bound from the cells cut by the level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, GapViolationError, InfiniteMeasureError
from .potentials import Gaussian, Potential, Sum

TWO_PI = 2.0 * math.pi
SERIES_RTOL = 1e-10
GRID_DEFAULT = 1024
GRID_CAP = 4096
_PROFILE_SAMPLES = 4000
_CELL_EQ = 1e-12


@dataclass(frozen=True)
class LevelSetResult:
    value: float
    method: str = "exact"
    error_bound: float = 0.0
    exceptional_flag: bool = False

    def __post_init__(self):
        if self.method not in ("exact", "grid", "monte_carlo"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.value < 0 and self.value > -1e-12 * (1 + self.error_bound):
            object.__setattr__(self, "value", 0.0)


@dataclass
class CoefficientSeries:
    window: Optional[tuple]
    gap_index: int
    B: float
    terms: list = field(default_factory=list)
    tail_bound: float = 0.0
    kind: str = "A"
    a: Optional[float] = None
    eta: Optional[float] = None
    method: str = "exact"
    error_bound: float = 0.0

    @property
    def total(self):
        return math.fsum(v for _, v in self.terms)

    def as_dict(self):
        return {
            "kind": self.kind,
            "window": list(self.window) if self.window else None,
            "a": self.a,
            "eta": self.eta,
            "gap_index": self.gap_index,
            "B": self.B,
            "terms": [[q, v] for q, v in self.terms],
            "tail_bound": self.tail_bound,
            "total": self.total,
            "method": self.method,
            "error_bound": self.error_bound,
        }


# -- single-level measures -----------------------------------------------------

def _unwrap(V):
    while isinstance(V, Sum) and len(V.children) == 1:
        V = V.children[0]
    return V


def _search_radius(V: Potential, lam: float) -> float:
    """Radius outside which |V| < lam for sure (lam > 0)."""
    kids = V.children if isinstance(V, Sum) else (V,)
    R = V.effective_radius
    n = len(kids)
    for k in kids:
        if isinstance(k, Gaussian) and abs(k.v) * n > lam:
            R = max(R, math.hypot(*k.center) + k.s * math.sqrt(math.log(2.0 * n * abs(k.v) / lam)))
    return R


def _cells_gt(cells, lam, strict):
    if strict:
        return math.fsum(a for v, a in cells if v > lam)
    return math.fsum(a for v, a in cells if v >= lam)


def _profile_gt(V: Potential, lam: float):
    # area of {V > lam} for radial V: scan each smooth piece, refine sign changes
    R = _search_radius(V, lam)
    cuts = sorted({0.0, R, *(b for b in V.radial_breaks() if 0.0 < b < R)})
    f = lambda r: float(V.profile(np.array(r))) - lam
    area = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        eps = 1e-14 * (hi - lo)
        r = np.linspace(lo + eps, hi, _PROFILE_SAMPLES)
        vals = V.profile(r) - lam
        above = vals > 0
        starts = []
        ends = []
        if above[0]:
            starts.append(lo)
        flips = np.flatnonzero(above[1:] != above[:-1])
        for i in flips:
            root = brentq(f, r[i], r[i + 1], xtol=1e-15 * max(r[i + 1], 1.0), rtol=1e-15)
            (ends if above[i] else starts).append(root)
        if above[-1]:
            ends.append(hi)
        area += sum(e * e - s * s for s, e in zip(starts, ends))
    return math.pi * area


def _grid_shape(n):
    n = min(int(n), GRID_CAP)
    return n, n


def _grid_gt(V: Potential, lam: float, n=GRID_DEFAULT):
    """Grid area of {V > lam} and the area of the cells the level cuts."""
    R = _search_radius(V, lam) if lam > 0 else V.effective_radius
    n_rho, n_theta = _grid_shape(n)
    r_edges = np.linspace(0.0, R, n_rho + 1)
    t_edges = TWO_PI * np.arange(n_theta + 1) / n_theta
    r_mid = 0.5 * (r_edges[1:] + r_edges[:-1])
    t_mid = 0.5 * (t_edges[1:] + t_edges[:-1])
    cell_area = 0.5 * (r_edges[1:] ** 2 - r_edges[:-1] ** 2) * (TWO_PI / n_theta)
    corner = V.polar(r_edges[:, None], t_edges[None, :])
    centre = V.polar(r_mid[:, None], t_mid[None, :])
    quad = np.stack([corner[:-1, :-1], corner[1:, :-1], corner[:-1, 1:], corner[1:, 1:], centre])
    hi = quad.max(axis=0)
    lo = quad.min(axis=0)
    inside = centre > lam
    cut = (lo <= lam) & (hi > lam)
    area = float(np.sum(inside * cell_area[:, None]))
    err = float(np.sum(cut * cell_area[:, None]))
    return area, err


def _measure_gt(V: Potential, lam: float, strict=True, grid_n=GRID_DEFAULT):
    """(area of {V > lam} or {V >= lam}, method, error bound)."""
    V = _unwrap(V)
    if lam <= 0 and not (lam == 0 and V.compact):
        raise InfiniteMeasureError(f"{{V > {lam}}} has infinite area")
    cells = V.cells()
    if cells is not None:
        return _cells_gt(cells, lam, strict), "exact", 0.0
    lo, hi = V.bounds()
    if hi < lam or (strict and hi == lam):
        return 0.0, "exact", 0.0
    if isinstance(V, Gaussian):
        if V.v <= lam:
            return 0.0, "exact", 0.0
        return math.pi * V.s * V.s * math.log(V.v / lam), "exact", 0.0
    if V.is_radial and lam > 0:
        return _profile_gt(V, lam), "exact", 0.0
    area, err = _grid_gt(V, lam, grid_n)
    return area, "grid", err


def _worse(m1, m2):
    return "grid" if "grid" in (m1, m2) else "exact"


def _cell_hits(V, levels):
    cells = _unwrap(V).cells()
    if cells is None:
        return False
    return any(abs(v - x) <= _CELL_EQ * max(1.0, abs(x)) for v, _ in cells for x in levels)


def measure_between(V: Potential, lam: float, mu: float, grid_n=GRID_DEFAULT) -> LevelSetResult:
    """Area of {lam < V < mu}."""
    if not lam < mu:
        raise DomainError(f"need lam < mu, got ({lam}, {mu})")
    if lam < 0 < mu:
        raise InfiniteMeasureError("interval straddles 0: the level set is unbounded")
    if mu <= 0:
        # {lam < V < mu} = {-mu < -V < -lam}
        return measure_between(V.scaled(-1.0), -mu, -lam, grid_n)
    lo, hi = V.bounds()
    if hi <= lam or lo >= mu:
        return LevelSetResult(0.0, "exact", 0.0, _cell_hits(V, (lam, mu)))
    a1, m1, e1 = _measure_gt(V, lam, True, grid_n)
    a2, m2, e2 = _measure_gt(V, mu, False, grid_n)
    return LevelSetResult(max(a1 - a2, 0.0), _worse(m1, m2), e1 + e2, _cell_hits(V, (lam, mu)))


def sup_measure(V: Potential, lam: float, sign: int = 1, grid_n=GRID_DEFAULT) -> LevelSetResult:
    """Area of {sign * V > lam}, lam > 0."""
    if not lam > 0:
        raise DomainError("sup_measure needs lam > 0")
    if sign not in (1, -1, "+", "-"):
        raise DomainError(f"sign must be +1 or -1, got {sign!r}")
    W = V if sign in (1, "+") else V.scaled(-1.0)
    area, method, err = _measure_gt(W, lam, True, grid_n)
    return LevelSetResult(area, method, err, _cell_hits(W, (lam,)))


def default_tol(V: Potential) -> float:
    area = math.fsum(a for _, a in (V.cells() or ()))
    if not area and V.compact:
        area = math.pi * V.effective_radius ** 2
    return 1e-6 * (1.0 + area)


def level_mass(V: Potential, lam: float, tol: Optional[float] = None,
               grid_n=GRID_DEFAULT) -> LevelSetResult:
    """Area of {V = lam}, with an exceptional-value flag.

    Piecewise-constant shapes are exact.  Otherwise the band
    {|V - lam| < tol} is measured at tol and tol/2; a band that does not
    roughly halve signals a plateau.
    """
    V = _unwrap(V)
    if lam == 0.0 and V.compact:
        return LevelSetResult(math.inf, "exact", 0.0, True)
    cells = V.cells()
    if cells is not None:
        mass = math.fsum(a for v, a in cells if abs(v - lam) <= _CELL_EQ * max(1.0, abs(lam)))
        return LevelSetResult(mass, "exact", 0.0, mass > 0)
    if tol is None:
        tol = default_tol(V)
    if lam != 0.0:
        tol = min(tol, 0.5 * abs(lam))
    wide = measure_between(V, lam - tol, lam + tol, grid_n)
    narrow = measure_between(V, lam - tol / 2, lam + tol / 2, grid_n)
    flagged = wide.value > 1e-6 and narrow.value > 0.75 * wide.value
    value = narrow.value if flagged else 0.0
    return LevelSetResult(value, wide.method, wide.error_bound, flagged)


# -- Landau-level bookkeeping ---------------------------------------------------

def landau_levels_upto(x: float, B: float):
    """Landau levels B(2q+1) that are <= x."""
    n = int(math.floor((x / B - 1.0) / 2.0)) + 1 if x >= B else 0
    return [B * (2 * q + 1) for q in range(max(n, 0))]


def gap_index(lam: float, B: float) -> int:
    """nu = number of Landau levels strictly below lam, minus one."""
    if lam <= B:
        return -1
    return int(math.ceil((lam / B - 1.0) / 2.0)) - 1


def check_gap(lam1: float, lam2: float, B: float) -> int:
    if not B > 0:
        raise DomainError("field strength B must be positive")
    if not lam1 < lam2:
        raise DomainError(f"need lam1 < lam2, got ({lam1}, {lam2})")
    nu = gap_index(lam1, B)
    next_level = B * (2 * (nu + 1) + 1)
    if lam2 >= next_level:
        raise GapViolationError(
            f"window [{lam1}, {lam2}] touches a Landau level (B = {B})")
    return nu


def eta0(a: float, B: float) -> float:
    """min_q (Lambda_q - a)^2."""
    q0 = max(0, int(round((a / B - 1.0) / 2.0)))
    return min((B * (2 * q + 1) - a) ** 2 for q in (q0 - 1, q0, q0 + 1) if q >= 0)


# -- coefficient series -----------------------------------------------------------

def script_A(V: Potential, lam1: float, lam2: float, B: float,
             grid_n=GRID_DEFAULT, max_terms=100000) -> CoefficientSeries:
    """(B/2pi) sum_q |{lam1 - Lambda_q < V < lam2 - Lambda_q}|."""
    nu = check_gap(lam1, lam2, B)
    series = CoefficientSeries((lam1, lam2), nu, B, kind="A")
    lo, hi = V.bounds()
    l1 = V.norms().l1
    pref = B / TWO_PI
    for q in range(max_terms):
        Lq = B * (2 * q + 1)
        x, y = lam1 - Lq, lam2 - Lq
        if y <= lo:
            # every later interval lies below inf V
            series.tail_bound = 0.0
            return series
        if x >= hi:
            series.terms.append((q, 0.0))
            continue
        res = measure_between(V, x, y, grid_n)
        series.terms.append((q, pref * res.value))
        series.method = _worse(series.method, res.method)
        series.error_bound += pref * res.error_bound
        if Lq > lam2:
            # later sets are disjoint and sit inside {|V| > dist}
            dist = B * (2 * q + 3) - lam2
            tail = pref * l1 / dist
            if tail < SERIES_RTOL * (series.total + 1e-30):
                series.tail_bound = tail
                return series
    raise DomainError("coefficient series did not terminate")


def _chebyshev_tail(c, eta, B, K):
    """Bound on sum_{q>=Q} (B/2pi) K / (c_q^2/2 - eta), c_q = c + 2B(q-Q)."""
    k = 2.0 * eta
    head = 1.0 / (0.5 * c * c - eta)
    if k > 0:
        rk = math.sqrt(k)
        integral = math.log((c + rk) / (c - rk)) / (2.0 * rk * B)
    elif k < 0:
        rk = math.sqrt(-k)
        integral = (0.5 * math.pi - math.atan(c / rk)) / (rk * B)
    else:
        integral = 1.0 / (B * c)
    return B / TWO_PI * K * (head + integral)


def script_B(V: Potential, Z: Potential, eta: float, a: float, B: float,
             grid_n=GRID_DEFAULT, max_terms=100000) -> CoefficientSeries:
    """(B/2pi) sum_q |{-2(Lambda_q - a) V - Z > (Lambda_q - a)^2 - eta}|."""
    if not B > 0:
        raise DomainError("field strength B must be positive")
    e0 = eta0(a, B)
    if not eta < e0:
        raise DomainError(f"need eta < eta0 = {e0}, got {eta}")
    window = (a - math.sqrt(eta), a + math.sqrt(eta)) if eta > 0 else None
    series = CoefficientSeries(window, gap_index(a, B), B, kind="B", a=a, eta=eta)
    supV = V.norms().sup
    supZ = Z.norms().sup
    K = 2.0 * V.norms().l2sq + Z.norms().l1
    pref = B / TWO_PI
    for q in range(max_terms):
        c = B * (2 * q + 1) - a
        tau = c * c - eta
        if c > supV and tau - 2.0 * c * supV - supZ >= 0:
            # tau - 2c sup|V| - sup|Z| grows with c: no later term is nonzero
            series.tail_bound = 0.0
            return series
        W = Sum((V.scaled(-2.0 * c), Z.scaled(-1.0)))
        area, method, err = _measure_gt(W, tau, True, grid_n)
        series.terms.append((q, pref * area))
        series.method = _worse(series.method, method)
        series.error_bound += pref * err
        cn = c + 2.0 * B
        if cn > 0 and 0.5 * cn * cn > eta:
            tail = _chebyshev_tail(cn, eta, B, K)
            if tail < SERIES_RTOL * (series.total + 1e-30):
                series.tail_bound = tail
                return series
    raise DomainError("coefficient series did not terminate")


def one_sided(V: Potential, lam: float, mu: float, scale: float = 1.0) -> dict:
    """A(lam -/+ eps, mu +/- eps; V) at eps = 1e-8 * scale, with a disagreement flag."""
    eps = 1e-8 * scale
    inner = measure_between(V, lam + eps, mu - eps)
    outer = measure_between(V, lam - eps, mu + eps)
    gap = outer.value - inner.value
    return {
        "inner": inner.value,
        "outer": outer.value,
        "disagree": gap > max(inner.error_bound + outer.error_bound, 1e-9 * (1 + outer.value)),
    }
