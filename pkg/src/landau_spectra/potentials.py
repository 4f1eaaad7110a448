"""Perturbing potentials on the plane.

Each shape knows its exact norms and, where one exists, an exact
decomposition into constant cells (used for level-set areas).  Values are
immutable; the scaling V(x/t) is never stored, callers divide the
argument.

Polar conventions: rho >= 0, theta taken mod 2pi in (0, 2pi].  Radial
and angular cells are half-open, (lo, hi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, NamedTuple

import numpy as np
from scipy.special import ive

from .errors import AccuracyError, DomainError, UnsupportedError
from .specfun import composite_rule, graded_cuts, panel_edges

TWO_PI = 2.0 * math.pi
# e^{-R^2/s^2} < 1e-10 for the Gaussian tail mass
_GAUSS_TAIL = math.sqrt(math.log(1e10))


class Norms(NamedTuple):
    l1: float
    l2sq: float
    sup: float


@dataclass(frozen=True)
class AngularCoefficients:
    rho: float
    m_max: int
    coefficients: np.ndarray  # index m + m_max

    def __getitem__(self, m):
        if abs(m) > self.m_max:
            raise IndexError(m)
        return self.coefficients[m + self.m_max]


def _wrap_angle(theta):
    th = np.mod(theta, TWO_PI)
    return np.where(th == 0.0, TWO_PI, th)


def _fft_table(polar, rho, m_max):
    # uniform trapezoid in theta == FFT; spectrally accurate for smooth V
    n = 64
    while n < 4 * max(m_max, 1):
        n *= 2
    theta = TWO_PI * np.arange(n) / n
    vals = polar(rho[:, None], theta[None, :])
    spec = np.fft.fft(vals, axis=1) / n
    m = np.arange(-m_max, m_max + 1)
    return spec[:, m % n]


class Potential:
    """Base class.  Subclasses provide ``polar`` and the metadata hooks."""

    is_radial = False
    compact = True

    # -- evaluation -------------------------------------------------------
    def polar(self, rho, theta):
        raise NotImplementedError

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return self.polar(np.hypot(x1, x2), np.arctan2(x2, x1))

    # -- metadata ---------------------------------------------------------
    @property
    def support_radius(self) -> float:
        """Radius of a disk about the origin containing supp V (inf if none)."""
        return self.effective_radius if self.compact else math.inf

    @property
    def effective_radius(self) -> float:
        raise NotImplementedError

    def norms(self) -> Norms:
        raise NotImplementedError

    @property
    def l1_norm(self):
        return self.norms().l1

    @property
    def l2_norm_sq(self):
        return self.norms().l2sq

    def integral(self) -> float:
        raise NotImplementedError

    def bounds(self) -> tuple:
        """Guaranteed enclosure (inf V, sup V) over the plane."""
        raise NotImplementedError

    def radial_breaks(self) -> tuple:
        """Radii about the origin where V may jump."""
        return ()

    def singular_radii(self) -> tuple:
        """Radii where the angular coefficients have square-root kinks."""
        return ()

    def angle_breaks(self) -> tuple:
        """(angle, singular) pairs where ray integrals of V are not smooth.

        ``singular`` marks square-root behaviour (a ray tangent to a jump curve).
        """
        return ()

    def ray_breaks(self, theta) -> tuple:
        """Radii where V jumps along the ray at angle ``theta`` (beyond radial_breaks)."""
        return ()

    def jump_circles(self) -> tuple:
        """(cx, cy, r) of circles across which V may jump."""
        return tuple((0.0, 0.0, r) for r in self.radial_breaks() if r > 0) if self.is_radial else ()

    def cells(self):
        """Exact list of (value, area) for piecewise-constant V, else None."""
        return None

    def partition(self):
        """(radius edges, angle edges) of a centered constant-cell layout, or None."""
        return None

    def profile(self, r):
        """Radial profile for radial potentials."""
        raise UnsupportedError(f"{type(self).__name__} is not radial")

    # -- transforms -------------------------------------------------------
    def scaled(self, c) -> "Potential":
        raise NotImplementedError

    def square(self) -> "Potential":
        raise NotImplementedError

    def rotated(self, phi) -> "Potential":
        raise NotImplementedError

    def angular_table(self, rho, m_max):
        """V_m(rho) for |m| <= m_max, shape (len(rho), 2 m_max + 1).

        V_m(rho) = (1/2pi) int V(rho, theta) e^{-i m theta} dtheta.
        """
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        if self.is_radial:
            out = np.zeros((rho.size, 2 * m_max + 1), dtype=complex)
            out[:, m_max] = self.profile(rho)
            return out
        return _fft_table(self.polar, rho, m_max)

    def __add__(self, other):
        return Sum((self, other))

    def __neg__(self):
        return self.scaled(-1.0)


def _disk_overlaps(c1, r1, c2, r2):
    return math.hypot(c1[0] - c2[0], c1[1] - c2[1]) < r1 + r2


@dataclass(frozen=True)
class AnnulusStep(Potential):
    """v on d1 < |x - center| <= d2, zero elsewhere."""

    d1: float
    d2: float
    v: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not (0 <= self.d1 < self.d2 < math.inf):
            raise DomainError("need 0 <= d1 < d2 < inf")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def is_radial(self):
        return self.center == (0.0, 0.0)

    @property
    def area(self):
        return math.pi * (self.d2**2 - self.d1**2)

    def polar(self, rho, theta):
        rho, theta = np.broadcast_arrays(np.asarray(rho, float), np.asarray(theta, float))
        if self.is_radial:
            r = rho
        else:
            x1 = rho * np.cos(theta) - self.center[0]
            x2 = rho * np.sin(theta) - self.center[1]
            r = np.hypot(x1, x2)
        return np.where((r > self.d1) & (r <= self.d2), float(self.v), 0.0)

    def profile(self, r):
        if not self.is_radial:
            return super().profile(r)
        r = np.asarray(r, dtype=float)
        return np.where((r > self.d1) & (r <= self.d2), float(self.v), 0.0)

    @property
    def effective_radius(self):
        return math.hypot(*self.center) + self.d2

    def norms(self):
        a = abs(self.v)
        return Norms(a * self.area, a * a * self.area, a)

    def integral(self):
        return self.v * self.area

    def bounds(self):
        return (min(0.0, self.v), max(0.0, self.v))

    def radial_breaks(self):
        if self.is_radial:
            return (self.d1, self.d2)
        c = math.hypot(*self.center)
        return tuple(sorted({abs(c - d) for d in (self.d1, self.d2)} | {c + self.d1, c + self.d2}))

    def singular_radii(self):
        return () if self.is_radial else self.radial_breaks()

    def angle_breaks(self):
        p = math.hypot(*self.center)
        theta_c = math.atan2(self.center[1], self.center[0])
        out = []
        for d in (self.d1, self.d2):
            if 0.0 < d < p:
                a = math.asin(d / p)
                out += [(theta_c - a, True), (theta_c + a, True)]
        return tuple(out)

    def jump_circles(self):
        return tuple((*self.center, d) for d in (self.d1, self.d2) if d > 0.0)

    def ray_breaks(self, theta):
        if self.is_radial:
            return ()
        p = math.hypot(*self.center)
        delta = theta - math.atan2(self.center[1], self.center[0])
        along, across = p * math.cos(delta), p * math.sin(delta)
        out = []
        for d in (self.d1, self.d2):
            disc = d * d - across * across
            if d > 0.0 and disc > 0.0:
                out += [r for r in (along - math.sqrt(disc), along + math.sqrt(disc)) if r > 0.0]
        return tuple(out)

    def angular_table(self, rho, m_max):
        if self.is_radial:
            return super().angular_table(rho, m_max)
        # the disk |x - c| < d meets the circle |x| = rho in the arc
        # |theta - theta_c| < phi(d); the annulus is a difference of disks
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        c = math.hypot(*self.center)
        theta_c = math.atan2(self.center[1], self.center[0])
        m = np.arange(-m_max, m_max + 1)

        def half_width(d):
            if d == 0.0:
                return np.zeros_like(rho)
            with np.errstate(divide="ignore", invalid="ignore"):
                cosphi = (rho * rho + c * c - d * d) / (2.0 * rho * c)
            cosphi = np.where(rho == 0.0, np.where(c < d, -1.0, 1.0), cosphi)
            return np.arccos(np.clip(cosphi, -1.0, 1.0))

        phi = half_width(self.d2)[:, None]
        phi1 = half_width(self.d1)[:, None]
        mm = np.where(m == 0, 1, m)[None, :]
        arc = lambda f: np.where(m[None, :] == 0, f / math.pi, np.sin(mm * f) / (math.pi * mm))
        return self.v * (arc(phi) - arc(phi1)) * np.exp(-1j * m * theta_c)[None, :]

    def cells(self):
        return [(float(self.v), self.area)]

    def partition(self):
        return ((self.d1, self.d2), ()) if self.is_radial else None

    def scaled(self, c):
        return AnnulusStep(self.d1, self.d2, c * self.v, self.center)

    def square(self):
        return AnnulusStep(self.d1, self.d2, self.v * self.v, self.center)

    def rotated(self, phi):
        c, s = math.cos(phi), math.sin(phi)
        x, y = self.center
        return AnnulusStep(self.d1, self.d2, self.v, (c * x - s * y, s * x + c * y))


@dataclass(frozen=True)
class RadialStep(Potential):
    """values[k] on breakpoints[k] < |x| <= breakpoints[k+1]."""

    breakpoints: tuple
    values: tuple
    is_radial = True

    def __post_init__(self):
        b = tuple(float(x) for x in self.breakpoints)
        v = tuple(float(x) for x in self.values)
        if len(b) != len(v) + 1 or len(v) == 0:
            raise DomainError("need len(breakpoints) == len(values) + 1")
        if b[0] < 0 or any(y <= x for x, y in zip(b, b[1:])) or not math.isfinite(b[-1]):
            raise DomainError("breakpoints must be finite, nonnegative and increasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    @property
    def areas(self):
        b = self.breakpoints
        return [math.pi * (hi * hi - lo * lo) for lo, hi in zip(b, b[1:])]

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        b = np.asarray(self.breakpoints)
        idx = np.searchsorted(b, r, side="left") - 1
        vals = np.concatenate([[0.0], self.values, [0.0]])
        idx = np.where(r <= b[0], -1, idx)
        return vals[np.clip(idx, -1, len(self.values)) + 1]

    def polar(self, rho, theta):
        rho, _ = np.broadcast_arrays(np.asarray(rho, float), np.asarray(theta, float))
        return self.profile(rho)

    @property
    def effective_radius(self):
        nz = [k for k, v in enumerate(self.values) if v != 0.0]
        return self.breakpoints[nz[-1] + 1] if nz else 0.0

    def norms(self):
        areas = self.areas
        return Norms(
            sum(abs(v) * a for v, a in zip(self.values, areas)),
            sum(v * v * a for v, a in zip(self.values, areas)),
            max(abs(v) for v in self.values),
        )

    def integral(self):
        return sum(v * a for v, a in zip(self.values, self.areas))

    def bounds(self):
        return (min(0.0, *self.values), max(0.0, *self.values))

    def radial_breaks(self):
        return self.breakpoints

    def cells(self):
        return list(zip(self.values, self.areas))

    def partition(self):
        return (self.breakpoints, ())

    def scaled(self, c):
        return RadialStep(self.breakpoints, tuple(c * v for v in self.values))

    def square(self):
        return RadialStep(self.breakpoints, tuple(v * v for v in self.values))

    def rotated(self, phi):
        return self


@dataclass(frozen=True)
class Gaussian(Potential):
    """v exp(-|x - center|^2 / s^2)."""

    v: float
    s: float
    center: tuple = (0.0, 0.0)
    compact = False

    def __post_init__(self):
        if not self.s > 0:
            raise DomainError("Gaussian width must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def is_radial(self):
        return self.center == (0.0, 0.0)

    def polar(self, rho, theta):
        rho, theta = np.broadcast_arrays(np.asarray(rho, float), np.asarray(theta, float))
        if self.is_radial:
            r2 = rho * rho
        else:
            x1 = rho * np.cos(theta) - self.center[0]
            x2 = rho * np.sin(theta) - self.center[1]
            r2 = x1 * x1 + x2 * x2
        return self.v * np.exp(-r2 / (self.s * self.s))

    def profile(self, r):
        if not self.is_radial:
            return super().profile(r)
        r = np.asarray(r, dtype=float)
        return self.v * np.exp(-(r * r) / (self.s * self.s))

    @property
    def effective_radius(self):
        # smallest R with int_{|x|>R} |V| < 1e-10 ||V||_1
        return math.hypot(*self.center) + self.s * _GAUSS_TAIL

    def norms(self):
        area = math.pi * self.s * self.s
        return Norms(abs(self.v) * area, self.v * self.v * area / 2.0, abs(self.v))

    def integral(self):
        return self.v * math.pi * self.s * self.s

    def bounds(self):
        return (min(0.0, self.v), max(0.0, self.v))

    def scaled(self, c):
        return Gaussian(c * self.v, self.s, self.center)

    def square(self):
        return Gaussian(self.v * self.v, self.s / math.sqrt(2.0), self.center)

    def angular_table(self, rho, m_max):
        if self.is_radial:
            return super().angular_table(rho, m_max)
        # V_m = v e^{-(rho^2 + c^2)/s^2} I_m(2 rho c / s^2) e^{-i m theta_c}
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        c = math.hypot(*self.center)
        theta_c = math.atan2(self.center[1], self.center[0])
        m = np.arange(-m_max, m_max + 1)
        s2 = self.s * self.s
        z = 2.0 * rho * c / s2
        env = self.v * np.exp(-((rho - c) ** 2) / s2)
        return env[:, None] * ive(np.abs(m)[None, :], z[:, None]) * np.exp(-1j * m * theta_c)[None, :]

    def product(self, other: "Gaussian") -> "Gaussian":
        """Pointwise product, again a Gaussian."""
        p1 = 1.0 / self.s**2
        p2 = 1.0 / other.s**2
        c1 = np.asarray(self.center)
        c2 = np.asarray(other.center)
        centre = (p1 * c1 + p2 * c2) / (p1 + p2)
        gap = float(np.sum((c1 - c2) ** 2))
        amp = self.v * other.v * math.exp(-gap / (self.s**2 + other.s**2))
        return Gaussian(amp, 1.0 / math.sqrt(p1 + p2), tuple(centre))

    def rotated(self, phi):
        c, s = math.cos(phi), math.sin(phi)
        x, y = self.center
        return Gaussian(self.v, self.s, (c * x - s * y, s * x + c * y))


@dataclass(frozen=True)
class SectorTile(Potential):
    """Piecewise constant on annular sectors Omega_{m,l}.

    Omega_{m,l} = {(m-1)d < rho <= m d, 2pi(l-1)/N < theta <= 2pi l/N},
    m >= 1, 1 <= l <= N; ``coefficients`` maps (m, l) to the value there.
    """

    d: float
    N: int
    coefficients: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if not self.d > 0 or int(self.N) < 1:
            raise DomainError("need d > 0 and N >= 1")
        coeffs = {}
        for (m, l), v in dict(self.coefficients).items():
            m, l = int(m), int(l)
            if m < 1 or not 1 <= l <= self.N:
                raise DomainError(f"tile index ({m}, {l}) outside the tiling")
            if v != 0.0:
                coeffs[(m, l)] = float(v)
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "coefficients", coeffs)

    def __hash__(self):
        return hash((self.d, self.N, tuple(sorted(self.coefficients.items()))))

    @property
    def m_max(self):
        return max((m for m, _ in self.coefficients), default=0)

    def tile_area(self, m):
        return math.pi / self.N * self.d**2 * (2 * m - 1)

    @cached_property
    def _grid(self):
        g = np.zeros((self.m_max + 2, self.N + 1))
        for (m, l), v in self.coefficients.items():
            g[m, l] = v
        return g

    def polar(self, rho, theta):
        rho, theta = np.broadcast_arrays(np.asarray(rho, float), np.asarray(theta, float))
        m = np.maximum(1, np.ceil(rho / self.d)).astype(int)
        l = np.clip(np.ceil(_wrap_angle(theta) * self.N / TWO_PI).astype(int), 1, self.N)
        m = np.where(m > self.m_max, self.m_max + 1, m)
        return self._grid[m, l]

    def _sector_fourier(self, m_arr):
        # (1/2pi) int_{sector l} e^{-i m theta} dtheta, shape (len(m), N)
        m = np.asarray(m_arr, dtype=float)[:, None]
        ta = TWO_PI * np.arange(self.N)[None, :] / self.N
        tb = ta + TWO_PI / self.N
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (np.exp(-1j * m * ta) - np.exp(-1j * m * tb)) / (2j * math.pi * m)
        return np.where(m == 0, 1.0 / self.N, val)

    def angular_table(self, rho, m_max):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        ms = np.arange(-m_max, m_max + 1)
        sf = self._sector_fourier(ms)  # (M, N)
        rings = self._grid[1 : self.m_max + 1, 1:]  # (rings, N)
        ring_coef = np.vstack([np.zeros((1, ms.size)), rings @ sf.T, np.zeros((1, ms.size))])
        ring = np.maximum(1, np.ceil(rho / self.d)).astype(int)
        ring = np.where(ring > self.m_max, self.m_max + 1, ring)
        return ring_coef[ring]

    @property
    def effective_radius(self):
        return self.m_max * self.d

    def norms(self):
        c = self.coefficients
        return Norms(
            sum(abs(v) * self.tile_area(m) for (m, _), v in c.items()),
            sum(v * v * self.tile_area(m) for (m, _), v in c.items()),
            max((abs(v) for v in c.values()), default=0.0),
        )

    def integral(self):
        return sum(v * self.tile_area(m) for (m, _), v in self.coefficients.items())

    def bounds(self):
        vals = list(self.coefficients.values())
        return (min(0.0, *vals), max(0.0, *vals))

    def radial_breaks(self):
        return tuple(self.d * k for k in range(self.m_max + 1))

    def angle_breaks(self):
        return tuple((TWO_PI * l / self.N, False) for l in range(self.N))

    def jump_circles(self):
        return tuple((0.0, 0.0, r) for r in self.radial_breaks() if r > 0)

    def cells(self):
        return [(v, self.tile_area(m)) for (m, _), v in sorted(self.coefficients.items())]

    def partition(self):
        return (self.radial_breaks(), tuple(TWO_PI * k / self.N for k in range(1, self.N)))

    def scaled(self, c):
        return SectorTile(self.d, self.N, {k: c * v for k, v in self.coefficients.items()})

    def square(self):
        return SectorTile(self.d, self.N, {k: v * v for k, v in self.coefficients.items()})

    def rotated(self, phi):
        k = phi * self.N / TWO_PI
        if abs(k - round(k)) > 1e-12:
            raise UnsupportedError("SectorTile rotates only by multiples of 2pi/N")
        k = int(round(k))
        return SectorTile(
            self.d, self.N,
            {(m, (l - 1 + k) % self.N + 1): v for (m, l), v in self.coefficients.items()},
        )


def _circle_crossing_angles(c1, c2):
    """Polar angles of the intersection points of two circles (x, y, r)."""
    x1, y1, r1 = c1
    x2, y2, r2 = c2
    D = math.hypot(x2 - x1, y2 - y1)
    if D == 0.0 or not abs(r1 - r2) < D < r1 + r2:
        return ()
    a = (r1 * r1 - r2 * r2 + D * D) / (2.0 * D)
    h = math.sqrt(max(r1 * r1 - a * a, 0.0))
    ux, uy = (x2 - x1) / D, (y2 - y1) / D
    px, py = x1 + a * ux, y1 + a * uy
    return tuple(math.atan2(py + sgn * h * ux, px - sgn * h * uy) for sgn in (1.0, -1.0))


def _ray_nodes(pot, R, width, theta, extra=()):
    brk = [r for r in pot.radial_breaks() if 0.0 < r < R]
    brk += list(pot.ray_breaks(float(theta))) + list(extra)
    return composite_rule(panel_edges(0.0, R, width, brk), 16)


def _ray_rule(pot, R, level, singular=(), extra=None):
    """Polar product rule adapted to the jump curves of ``pot``.

    Theta panels snap to ``pot.angle_breaks`` and are graded toward the
    singular ones and toward ``singular``; each ray gets its own rho
    panels snapped to the radii where it crosses a jump.  ``extra`` maps
    ray index to additional radii.  Returns (rho, theta, weight, ray
    index) with weight including rho.
    """
    angles = [(a % TWO_PI, s) for a, s in pot.angle_breaks()]
    angles += [(a % TWO_PI, True) for a in singular]
    sing = [a + k * TWO_PI for a, s in angles if s for k in (-1, 0, 1)]
    width_t = TWO_PI / (8 * 2**level)
    t_edges = panel_edges(0.0, TWO_PI, width_t,
                          [a for a, _ in angles] + graded_cuts(sing, 0.0, TWO_PI, width_t))
    theta, wt = composite_rule(t_edges, 16)
    width_r = R / (8 * 2**level)
    parts = []
    for k, (t, w) in enumerate(zip(theta, wt)):
        rho, wr = _ray_nodes(pot, R, width_r, t, (extra or {}).get(k, ()))
        parts.append((rho, np.full(rho.size, t), w * wr * rho, np.full(rho.size, k)))
    return tuple(np.concatenate(x) for x in zip(*parts))


def _sign_flips(ray, vals):
    return np.nonzero((ray[1:] == ray[:-1]) & (vals[1:] * vals[:-1] < 0.0))[0]


def _sign_roots(pot, rho, theta, ray, vals, iterations=60):
    """Radii where V changes sign between consecutive nodes of a ray, by bisection."""
    idx = _sign_flips(ray, vals)
    lo, hi, t = rho[idx].copy(), rho[idx + 1].copy(), theta[idx]
    v_lo = vals[idx]
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        same = pot.polar(mid, t) * v_lo > 0.0
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    out = {}
    for k, r in zip(ray[idx], 0.5 * (lo + hi)):
        out.setdefault(int(k), []).append(float(r))
    return out


def _tangent_angles(pot, R, rho, theta, ray, vals, iterations=50):
    """Angles where a ray touches the zero set of V.

    There the number of sign changes along the ray jumps and the ray
    integral of |V| has a square-root singularity in theta.  Located by
    bisection between neighbouring rays with different counts.
    """
    n_ray = int(ray.max()) + 1
    counts = np.bincount(ray[_sign_flips(ray, vals)], minlength=n_ray)
    starts = np.searchsorted(ray, np.arange(n_ray))
    t_ray = theta[starts]
    width = R / 64.0

    def count(t):
        r, _ = _ray_nodes(pot, R, width, t)
        v = pot.polar(r, np.full(r.size, t))
        return int(np.count_nonzero(v[1:] * v[:-1] < 0.0))

    out = []
    for k in np.nonzero(np.diff(counts) != 0)[0]:
        lo, hi = float(t_ray[k]), float(t_ray[k + 1])
        c_lo = count(lo)
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if count(mid) == c_lo:
                lo = mid
            else:
                hi = mid
        out.append(0.5 * (lo + hi))
    return out


def _polar_integrate(pot, R, power, rtol=1e-10, max_level=3, tol=1e-6):
    """int_{|x|<R} |V|^power dx on ray-adapted polar panels.

    Jump curves and (for power 1) sign changes of V become panel edges,
    so each ray integral sees a smooth integrand; angles where rays touch
    the zero set are graded toward.  Levels halve the panel widths until
    two agree to ``rtol``; AccuracyError if the last two still differ by
    more than ``tol``.
    """
    singular = ()
    if power == 1:
        rho, theta, w, ray = _ray_rule(pot, R, 1)
        singular = _tangent_angles(pot, R, rho, theta, ray, pot.polar(rho, theta))
    prev = cur = None
    for level in range(max_level + 1):
        rho, theta, w, ray = _ray_rule(pot, R, level, singular)
        vals = pot.polar(rho, theta)
        if power == 1:
            roots = _sign_roots(pot, rho, theta, ray, vals)
            if roots:
                rho, theta, w, ray = _ray_rule(pot, R, level, singular, roots)
                vals = pot.polar(rho, theta)
        cur = float(np.abs(vals) ** power @ w)
        if prev is not None and abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return cur
        if level < max_level:
            prev = cur
    if abs(cur - prev) > tol * max(abs(cur), 1e-300):
        raise AccuracyError(f"polar integral of |V|^{power} did not converge",
                            achieved=abs(cur - prev) / max(abs(cur), 1e-300))
    return cur


@dataclass(frozen=True)
class Sum(Potential):
    children: tuple

    def __post_init__(self):
        flat = []
        for c in self.children:
            flat.extend(c.children if isinstance(c, Sum) else [c])
        if not flat:
            raise DomainError("empty Sum")
        object.__setattr__(self, "children", tuple(flat))

    @property
    def is_radial(self):
        return all(c.is_radial for c in self.children)

    @property
    def compact(self):
        return all(c.compact for c in self.children)

    def polar(self, rho, theta):
        return sum(c.polar(rho, theta) for c in self.children)

    def profile(self, r):
        if not self.is_radial:
            return super().profile(r)
        return sum(c.profile(r) for c in self.children)

    def angular_table(self, rho, m_max):
        return sum(c.angular_table(rho, m_max) for c in self.children)

    @property
    def effective_radius(self):
        return max(c.effective_radius for c in self.children)

    @cached_property
    def disjoint(self):
        """True when the children have pairwise disjoint supports (checked conservatively)."""
        kids = self.children
        if not all(c.compact for c in kids):
            return False
        for i, a in enumerate(kids):
            for b in kids[i + 1 :]:
                if not _separated(a, b):
                    return False
        return True

    def partition(self):
        parts = [c.partition() for c in self.children]
        if any(p is None for p in parts):
            return None
        radii = sorted({r for p in parts for r in p[0]})
        angles = sorted({a for p in parts for a in p[1]})
        return (tuple(radii), tuple(angles))

    @cached_property
    def _cells(self):
        part = self.partition()
        if part is not None:
            radii, angles = part
            th = [0.0, *angles, TWO_PI]
            out = []
            for r0, r1 in zip(radii, radii[1:]):
                rm = 0.5 * (r0 + r1)
                for a0, a1 in zip(th, th[1:]):
                    val = float(self.polar(np.array(rm), np.array(0.5 * (a0 + a1))))
                    if val != 0.0:
                        out.append((val, 0.5 * (a1 - a0) * (r1 * r1 - r0 * r0)))
            return out
        if self.disjoint:
            kid_cells = [c.cells() for c in self.children]
            if all(k is not None for k in kid_cells):
                return [cell for k in kid_cells for cell in k]
        return None

    def cells(self):
        return self._cells

    @cached_property
    def _norms(self):
        cells = self.cells()
        if cells is not None:
            return Norms(
                sum(abs(v) * a for v, a in cells),
                sum(v * v * a for v, a in cells),
                max((abs(v) for v, _ in cells), default=0.0),
            )
        if self.disjoint:
            ns = [c.norms() for c in self.children]
            return Norms(sum(n.l1 for n in ns), sum(n.l2sq for n in ns), max(n.sup for n in ns))
        lo, hi = self.bounds()
        R = self.effective_radius
        l1 = _polar_integrate(self, R, 1)
        l2 = _polar_integrate(self, R, 2)
        return Norms(l1, l2, max(abs(lo), abs(hi)))

    def norms(self):
        return self._norms

    def integral(self):
        return sum(c.integral() for c in self.children)

    def bounds(self):
        cells = self.cells()
        if cells is not None:
            vals = [v for v, _ in cells]
            return (min(0.0, *vals), max(0.0, *vals))
        bs = [c.bounds() for c in self.children]
        if self.disjoint:
            return (min(b[0] for b in bs), max(b[1] for b in bs))
        return (sum(b[0] for b in bs), sum(b[1] for b in bs))

    def radial_breaks(self):
        return tuple(sorted({r for c in self.children for r in c.radial_breaks()}))

    def singular_radii(self):
        return tuple(sorted({r for c in self.children for r in c.singular_radii()}))

    def angle_breaks(self):
        # where two jump circles cross, ray integrals have a kink in theta
        circles = sorted({c for k in self.children for c in k.jump_circles()})
        crossings = [(a, False) for i, c1 in enumerate(circles)
                     for c2 in circles[i + 1:] for a in _circle_crossing_angles(c1, c2)]
        return tuple(b for c in self.children for b in c.angle_breaks()) + tuple(crossings)

    def jump_circles(self):
        return tuple(c for k in self.children for c in k.jump_circles())

    def ray_breaks(self, theta):
        return tuple(r for c in self.children for r in c.ray_breaks(theta))

    def scaled(self, c):
        return Sum(tuple(k.scaled(c) for k in self.children))

    def square(self):
        if len(self.children) == 1:
            return self.children[0].square()
        if self.disjoint:
            return Sum(tuple(k.square() for k in self.children))
        if all(isinstance(k, Gaussian) for k in self.children):
            kids = self.children
            return Sum(tuple(
                (a.product(b) if i == j else a.product(b).scaled(2.0))
                for i, a in enumerate(kids) for j, b in enumerate(kids) if j >= i
            ))
        part = self.partition()
        if part is not None and not part[1]:
            radii = part[0]
            mids = 0.5 * (np.asarray(radii[1:]) + np.asarray(radii[:-1]))
            return RadialStep(radii, tuple(self.profile(mids) ** 2))
        lo, hi = self.bounds()
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise UnsupportedError("cannot square an unbounded potential")
        return GridSampled.from_function(lambda r, t: self.polar(r, t) ** 2, self.effective_radius)

    def rotated(self, phi):
        return Sum(tuple(k.rotated(phi) for k in self.children))


def _separated(a, b):
    # centered radial layouts with non-overlapping radial ranges, or
    # bounding disks that do not meet
    ca = getattr(a, "center", (0.0, 0.0))
    cb = getattr(b, "center", (0.0, 0.0))
    if isinstance(a, AnnulusStep) and isinstance(b, AnnulusStep) and ca == cb:
        return a.d2 <= b.d1 or b.d2 <= a.d1
    ra = a.effective_radius - math.hypot(*ca)
    rb = b.effective_radius - math.hypot(*cb)
    return not _disk_overlaps(ca, ra, cb, rb)


@dataclass(frozen=True, eq=False)
class GridSampled(Potential):
    """Samples on a polar grid, bilinear interpolation, zero beyond ``R``.

    ``samples[i, j]`` is the value at rho_i = i R / (n_rho - 1),
    theta_j = 2 pi j / n_theta.
    """

    samples: np.ndarray
    R: float

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[0] < 2 or s.shape[1] < 4:
            raise DomainError("samples must be an (n_rho >= 2, n_theta >= 4) array")
        if not (self.R > 0 and math.isfinite(self.R)):
            raise DomainError("support radius must be positive and finite")
        if not np.all(np.isfinite(s)):
            raise UnsupportedError("grid samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_function(cls, func, R, n_rho=2048, n_theta=512):
        """Sample ``func(rho, theta)``, or a Potential, on the polar grid."""
        if isinstance(func, Potential):
            func = func.polar
        rho = np.linspace(0.0, R, n_rho)
        theta = TWO_PI * np.arange(n_theta) / n_theta
        vals = np.asarray(func(rho[:, None], theta[None, :]), dtype=float)
        vals = np.broadcast_to(vals, (n_rho, n_theta)).copy()
        # support truncation where |V| < 1e-12 sup
        peak = np.max(np.abs(vals))
        vals[np.abs(vals) < 1e-12 * peak] = 0.0
        return cls(vals, float(R))

    @property
    def n_rho(self):
        return self.samples.shape[0]

    @property
    def n_theta(self):
        return self.samples.shape[1]

    def polar(self, rho, theta):
        rho, theta = np.broadcast_arrays(np.asarray(rho, float), np.asarray(theta, float))
        fr = rho / self.R * (self.n_rho - 1)
        i0 = np.clip(np.floor(fr).astype(int), 0, self.n_rho - 2)
        a = fr - i0
        ft = np.mod(theta, TWO_PI) / TWO_PI * self.n_theta
        j0 = np.floor(ft).astype(int) % self.n_theta
        b = ft - np.floor(ft)
        j1 = (j0 + 1) % self.n_theta
        s = self.samples
        val = ((1 - a) * ((1 - b) * s[i0, j0] + b * s[i0, j1])
               + a * ((1 - b) * s[i0 + 1, j0] + b * s[i0 + 1, j1]))
        return np.where(rho <= self.R, val, 0.0)

    @property
    def effective_radius(self):
        return self.R

    def _cell_coefficients(self):
        """Bilinear coefficients per cell: f = c0 + c1 a + c2 b + c3 a b on [0,1]^2."""
        s = self.samples
        s00, s10 = s[:-1], s[1:]
        s01, s11 = np.roll(s00, -1, axis=1), np.roll(s10, -1, axis=1)
        return s00, s10 - s00, s01 - s00, s11 - s10 - s01 + s00

    @cached_property
    def _norms(self):
        # exact cell integrals of |f| rho and f^2 rho for the bilinear interpolant
        h = self.R / (self.n_rho - 1)
        dth = TWO_PI / self.n_theta
        rho0 = (np.arange(self.n_rho - 1) * h)[:, None]
        c0, c1, c2, c3 = self._cell_coefficients()

        def abs_inner(p, q, r0):
            # int_0^1 |p + q a| (r0 + h a) da
            F = lambda x: p * r0 * x + (p * h + q * r0) * x * x / 2 + q * h * x**3 / 3
            with np.errstate(divide="ignore", invalid="ignore"):
                root = np.where(q != 0, -p / q, -1.0)
            inside = (root > 0) & (root < 1)
            whole = np.abs(F(1.0))
            rs = np.where(inside, root, 0.5)
            split = np.abs(F(rs)) + np.abs(F(1.0) - F(rs))
            return np.where(inside, split, whole)

        r0 = np.broadcast_to(rho0, c0.shape)
        corners = np.stack([c0, c0 + c1, c0 + c2, c0 + c1 + c2 + c3])
        mixed = (corners.min(axis=0) < 0) & (corners.max(axis=0) > 0)
        # same-sign cells: |int f rho| in closed form
        exact = np.abs((c0 + c2 / 2) * (r0 + h / 2) + (c1 + c3 / 2) * (r0 / 2 + h / 3))
        l1 = float(np.sum(np.where(mixed, 0.0, exact)))
        if np.any(mixed):
            m0, m1, m2, m3, mr = (x[mixed] for x in (c0, c1, c2, c3, r0))
            # kinks in b where the zero line meets a = 0 or a = 1
            with np.errstate(divide="ignore", invalid="ignore"):
                k0 = np.where(m2 != 0, -m0 / m2, -1.0)
                k1 = np.where(m2 + m3 != 0, -(m0 + m1) / (m2 + m3), -1.0)
            cuts = np.sort(np.stack([np.zeros_like(k0), np.clip(k0, 0, 1),
                                     np.clip(k1, 0, 1), np.ones_like(k0)]), axis=0)
            x, w = np.polynomial.legendre.leggauss(24)
            tot = np.zeros(m0.shape)
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                half = 0.5 * (hi - lo)
                b = lo[:, None] + half[:, None] * (x[None, :] + 1.0)
                vals = abs_inner(m0[:, None] + m2[:, None] * b, m1[:, None] + m3[:, None] * b, mr[:, None])
                tot += half * (vals @ w)
            l1 += float(np.sum(tot))
        # f^2 rho is a polynomial of degree (3, 2): 2 x 2 Gauss points are exact
        g = np.array([0.5 - 0.5 / math.sqrt(3), 0.5 + 0.5 / math.sqrt(3)])
        l2 = 0.0
        for a in g:
            for b in g:
                f = c0 + c1 * a + c2 * b + c3 * a * b
                l2 += 0.25 * float(np.sum(f * f * (r0 + h * a)))
        return Norms(l1 * h * dth, l2 * h * dth, float(np.max(np.abs(self.samples))))

    def norms(self):
        return self._norms

    def integral(self):
        h = self.R / (self.n_rho - 1)
        r0 = (np.arange(self.n_rho - 1) * h)[:, None]
        c0, c1, c2, c3 = self._cell_coefficients()
        cell = (c0 + c2 / 2) * (r0 + h / 2) + (c1 + c3 / 2) * (r0 / 2 + h / 3)
        return float(np.sum(cell)) * h * TWO_PI / self.n_theta

    def bounds(self):
        return (min(0.0, float(self.samples.min())), max(0.0, float(self.samples.max())))

    def radial_breaks(self):
        return (self.R,)

    def scaled(self, c):
        return GridSampled(c * self.samples, self.R)

    def square(self):
        return GridSampled(self.samples**2, self.R)

    def rotated(self, phi):
        k = phi * self.n_theta / TWO_PI
        if abs(k - round(k)) > 1e-12:
            raise UnsupportedError("GridSampled rotates only by whole grid steps")
        return GridSampled(np.roll(self.samples, int(round(k)), axis=1), self.R)


ZERO = RadialStep((0.0, 1.0), (0.0,))


# -- module-level operations --------------------------------------------------

def evaluate(V: Potential, x):
    """V at the point(s) x = (x1, x2)."""
    x1, x2 = x
    out = V(x1, x2)
    return float(out) if np.ndim(out) == 0 else out


def square(V: Potential) -> Potential:
    lo, hi = V.bounds()
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise UnsupportedError("cannot square an unbounded potential")
    return V.square()


def angular_fourier(V: Potential, rho, m_max, n_theta=None) -> AngularCoefficients:
    """Angular Fourier coefficients V_m(rho), |m| <= m_max.

    Exact for radial and SectorTile shapes; otherwise a uniform trapezoid
    sum with ``n_theta`` points (a power of two, at least 4 m_max).
    """
    if m_max < 0:
        raise DomainError("m_max must be nonnegative")
    if n_theta is not None:
        if n_theta < 4 * m_max or n_theta & (n_theta - 1):
            raise DomainError("n_theta must be a power of two >= 4 m_max")
    rho_arr = np.array([float(rho)])
    if n_theta is None or V.is_radial or isinstance(V, SectorTile):
        row = V.angular_table(rho_arr, m_max)[0]
    else:
        theta = TWO_PI * np.arange(n_theta) / n_theta
        spec = np.fft.fft(V.polar(rho_arr[:, None], theta[None, :]), axis=1)[0] / n_theta
        row = spec[np.arange(-m_max, m_max + 1) % n_theta]
    return AngularCoefficients(float(rho), int(m_max), row)


def norms(V: Potential) -> Norms:
    n = V.norms()
    if not (math.isfinite(n.l1) and math.isfinite(n.l2sq)):
        raise UnsupportedError("potential is not in L1 and L2")
    return n


# -- JSON description -----------------------------------------------------------

def potential_from_dict(d: Mapping) -> Potential:
    """Build a potential from its JSON description (see README for the schema)."""
    try:
        shape = d["shape"]
    except (KeyError, TypeError):
        raise DomainError("potential description needs a 'shape' field") from None
    center = tuple(d.get("center", (0.0, 0.0)))
    if shape in ("annulus_step", "disk"):
        return AnnulusStep(float(d.get("d1", 0.0)), float(d.get("d2", d.get("radius", 1.0))),
                           float(d.get("v", 1.0)), center)
    if shape == "radial_step":
        return RadialStep(tuple(d["breakpoints"]), tuple(d["values"]))
    if shape == "gaussian":
        return Gaussian(float(d["v"]), float(d["s"]), center)
    if shape == "sector_tile":
        coeffs = {(int(c["m"]), int(c["l"])): float(c["value"]) for c in d["coefficients"]}
        return SectorTile(float(d["d"]), int(d["N"]), coeffs)
    if shape == "sum":
        return Sum(tuple(potential_from_dict(c) for c in d["children"]))
    if shape == "grid_sampled":
        return GridSampled(np.asarray(d["samples"], dtype=float), float(d["R"]))
    if shape == "zero":
        return ZERO
    raise DomainError(f"unknown potential shape {shape!r}")


def potential_to_dict(V: Potential) -> dict:
    if isinstance(V, AnnulusStep):
        return {"shape": "annulus_step", "d1": V.d1, "d2": V.d2, "v": V.v, "center": list(V.center)}
    if isinstance(V, RadialStep):
        return {"shape": "radial_step", "breakpoints": list(V.breakpoints), "values": list(V.values)}
    if isinstance(V, Gaussian):
        return {"shape": "gaussian", "v": V.v, "s": V.s, "center": list(V.center)}
    if isinstance(V, SectorTile):
        return {"shape": "sector_tile", "d": V.d, "N": V.N,
                "coefficients": [{"m": m, "l": l, "value": v}
                                 for (m, l), v in sorted(V.coefficients.items())]}
    if isinstance(V, Sum):
        return {"shape": "sum", "children": [potential_to_dict(c) for c in V.children]}
    if isinstance(V, GridSampled):
        return {"shape": "grid_sampled", "R": V.R, "samples": V.samples.tolist()}
    raise DomainError(f"cannot describe {type(V).__name__}")


def is_zero(V: Potential) -> bool:
    return V.norms().l1 == 0.0


