"""Property suite run by ``landau-spectra selftest``.

Every check is an always-true statement (identity, inequality or a
closed-form value), so a failure points at a bug rather than at an
unlucky tolerance.  Sizes are kept small enough for a laptop.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import eigencount, landau, levelset, specfun
from .hamiltonian import assemble_L, validate_window
from .landau import BasisSlice, LandauModel
from .potentials import AnnulusStep, Gaussian, RadialStep, SectorTile, square


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def as_dict(self):
        return {"name": self.name, "pass": self.passed, "detail": self.detail}


# -- special functions ----------------------------------------------------------------

def check_laguerre_bound(q_max=20, alpha_max=200, xi_max=500.0, n_xi=201):
    """|L_q^(alpha)(xi)| <= (alpha+q)^q e^{xi/(alpha+q)} whenever alpha + q >= 1."""
    xi = np.linspace(0.0, xi_max, n_xi)
    violations = 0
    worst = 0.0
    for q in range(q_max + 1):
        for alpha in range(-q, alpha_max + 1):
            k = alpha + q
            if k < 1:
                continue
            val = np.abs(specfun.laguerre(q, alpha, xi))
            # compare in logs: the bound can reach e^500
            with np.errstate(divide="ignore"):
                lhs = np.log(val)
            rhs = q * math.log(k) + xi / k
            excess = lhs - rhs
            bad = excess > 1e-12 * np.maximum(1.0, np.abs(rhs))
            violations += int(np.count_nonzero(bad))
            worst = max(worst, float(np.max(excess)))
    return violations == 0, {"violations": violations, "max_log_excess": worst}


def check_incomplete_gamma():
    errs = []
    for x in (0.0, 0.1, 1.0, 2.5, 10.0, 40.0):
        errs.append(abs(specfun.reg_lower_inc_gamma(1, x) - (1.0 - math.exp(-x))))
        errs.append(abs(specfun.reg_lower_inc_gamma(2, x) - (1.0 - (1.0 + x) * math.exp(-x))))
    sums = []
    mono = True
    for s in (0.5, 1.0, 3.0, 12.5, 100.0):
        prev = -1.0
        for x in np.linspace(0.0, 3.0 * s + 10.0, 60):
            p = specfun.reg_lower_inc_gamma(s, x)
            sums.append(abs(p + specfun.reg_upper_inc_gamma(s, x) - 1.0))
            mono &= p >= prev
            prev = p
    ok = max(errs) <= 1e-12 and max(sums) <= 1e-12 and mono
    return ok, {"closed_form_err": max(errs), "complement_err": max(sums), "monotone": mono}


def radial_gram(q_max, alpha):
    """Matrix of int ell_{q,alpha} ell_{q',alpha} dxi over q, q' <= q_max (alpha >= -q)."""
    qs = [q for q in range(q_max + 1) if alpha + q >= 0]
    xi_hi = 2.0 * (alpha + 2 * q_max) + 200.0
    rows = lambda xi: np.array([specfun.radial_table(q, [alpha], xi)[0] for q in qs])
    G = specfun.adaptive_xi_integral(
        lambda xi: (lambda T: T[:, None, :] * T[None, :, :])(rows(xi)), 0.0, xi_hi)
    return qs, G


def check_orthonormality(q_max=10, alphas=(-10, -3, 0, 1, 7, 40, 150, 500)):
    worst = 0.0
    for alpha in alphas:
        qs, G = radial_gram(q_max, alpha)
        worst = max(worst, float(np.max(np.abs(G - np.eye(len(qs))))))
    return worst <= 1e-9, {"max_deviation": worst}


# -- operators ----------------------------------------------------------------------

def _sector():
    return SectorTile(1.0, 4, {(1, 1): 1.0, (1, 2): -0.5})


def check_trace(t=3.0):
    model = LandauModel(1.0)
    worst = 0.0
    for V in (AnnulusStep(0.0, 1.0, 1.0), _sector(), Gaussian(0.7, 0.8)):
        for q in (0, 1):
            slc = BasisSlice.for_potential(model, q, V, t)
            blk = landau.assemble_toeplitz(model, q, q, V, slc, slc)
            tr, pred = landau.trace_identities(blk, V)
            worst = max(worst, abs(tr - pred) / abs(pred))
    return worst <= 1e-6, {"max_relative_error": worst}


def check_radial_vs_dense(t_values=(2.0, 5.0, 10.0)):
    model = LandauModel(1.0)
    worst = 0.0
    for V in (AnnulusStep(0.0, 1.0, 1.0), RadialStep((0.0, 0.5, 1.2), (2.0, -0.7))):
        for t in t_values:
            for q in range(4):
                slc = BasisSlice.for_potential(model, q, V, t)
                fast = np.array([v for _, v in landau.radial_toeplitz_eigs(model, q, V, t, slc.alpha_max)])
                dense = landau.assemble_toeplitz(model, q, q, V, slc, slc).entries
                worst = max(worst, float(np.max(np.abs(np.diag(dense).real - fast))),
                            float(np.max(np.abs(dense - np.diag(np.diag(dense))))))
    return worst <= 1e-9, {"max_difference": worst}


def check_containment(t=4.0):
    model = LandauModel(1.0)
    worst = 0.0
    for V in (_sector(), AnnulusStep(0.2, 0.9, -1.3, (0.4, 0.1))):
        lo, hi = V.bounds()
        slc = BasisSlice.for_potential(model, 0, V, t)
        ev = eigencount.hermitian_eigenvalues(
            landau.assemble_toeplitz(model, 0, 0, V, slc, slc).entries).eigenvalues
        worst = max(worst, float(lo - ev.min()), float(ev.max() - hi))
    return worst <= 1e-10, {"max_excursion": worst}


def check_inertia(rng, n_mats=10, dim=60, shifts=20):
    mismatches = 0
    for _ in range(n_mats):
        X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        M = X + X.conj().T
        ev = eigencount.hermitian_eigenvalues(M).eigenvalues
        for eta in rng.uniform(ev[0] - 1, ev[-1] + 1, size=shifts):
            mismatches += eigencount.inertia_below(M, eta) != int(np.count_nonzero(ev < eta))
    # and the assembled squared operator for a non-radial potential
    model = LandauModel(1.0)
    window = validate_window(model, 1.5, 2.5)
    V = _sector()
    op = assemble_L(model, V, square(V), window, 2, 4.0)
    eigencount.count_check(op.dense(), window.shift)
    return mismatches == 0, {"mismatches": int(mismatches)}


def check_kyfan(rng, pairs=500, dim=30):
    violations = 0
    for _ in range(pairs):
        X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        Y = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        lam1, lam2 = np.exp(rng.uniform(math.log(0.1), math.log(20.0), size=2))
        flags = eigencount.kyfan_check(X + X.conj().T, Y + Y.conj().T, lam1, lam2)
        violations += sum(not f for f in flags)
    return violations == 0, {"violations": int(violations), "pairs": pairs}


def localization_ratio(t_small=5.0, t_large=15.0):
    """Largest singular value of the disk/annulus sandwich at two scales."""
    model = LandauModel(1.0)
    W1 = AnnulusStep(0.0, 1.0, 1.0)
    W2 = AnnulusStep(2.0, 3.0, 1.0)
    tops = []
    for t in (t_small, t_large):
        slc = BasisSlice.for_potential(model, 0, W2, t)
        S = landau.assemble_sandwich(model, 0, W1, W2, slc)
        tops.append(float(eigencount.singular_values(S.entries)[0]))
    return tops


def check_localization():
    small, large = localization_ratio()
    ratio = small / large if large > 0 else math.inf
    return ratio >= 10.0, {"sigma_t5": small, "sigma_t15": large, "ratio": ratio}


def hankel_counts(t_values=(8.0, 12.0, 16.0, 20.0), lam=0.1):
    """n(lam; T_{0,1}) / t^2 for the unit disk."""
    model = LandauModel(1.0)
    V = AnnulusStep(0.0, 1.0, 1.0)
    out = []
    for t in t_values:
        amax = landau.default_alpha_max(model, V, t)
        r = BasisSlice(0, amax, t)
        c = BasisSlice(1, amax, t)
        blk = landau.assemble_toeplitz(model, 0, 1, V, r, c).entries
        out.append(eigencount.n_singular(blk, lam) / t ** 2)
    return out


def check_hankel():
    vals = hankel_counts()
    ok = all(b < a for a, b in zip(vals, vals[1:]))
    return ok, {"n_over_t2": vals}


def identity_potentials():
    return [
        AnnulusStep(0.0, 1.0, 1.0),
        RadialStep((0.0, 0.5, 1.2, 2.0), (1.3, -0.7, 0.4)),
        Gaussian(1.7, 1.1),
        _sector(),
    ]


def random_window(rng):
    B = rng.uniform(0.5, 2.0)
    nu = int(rng.integers(-1, 3))
    lo = B * (2 * nu + 1) if nu >= 0 else -3.0 * B
    hi = B * (2 * nu + 3)
    lam1 = lo + rng.uniform(0.02, 0.9) * (hi - lo)
    lam2 = lam1 + rng.uniform(0.05, 0.95) * (hi - lam1)
    return B, lam1, lam2


def check_A_equals_B(rng, windows=20):
    worst = 0.0
    for V in identity_potentials():
        Z = square(V)
        for _ in range(windows):
            B, lam1, lam2 = random_window(rng)
            A = levelset.script_A(V, lam1, lam2, B).total
            a, b = 0.5 * (lam1 + lam2), 0.5 * (lam2 - lam1)
            Bv = levelset.script_B(V, Z, b * b, a, B).total
            err = abs(A - Bv) / abs(A) if A else abs(Bv)
            worst = max(worst, err)
    return worst <= 1e-9, {"max_relative_difference": worst}


def check_tile_additivity(t=10.0, lam=0.3):
    """n_+ of two well-separated tiles ~ sum of the separate counts."""
    model = LandauModel(1.0)
    V1 = SectorTile(1.0, 4, {(1, 1): 1.0})
    V2 = SectorTile(1.0, 4, {(3, 3): 0.6})
    V12 = SectorTile(1.0, 4, {(1, 1): 1.0, (3, 3): 0.6})
    counts = []
    for V in (V1, V2, V12):
        slc = BasisSlice.for_potential(model, 0, V12, t)
        ev = eigencount.hermitian_eigenvalues(
            landau.assemble_toeplitz(model, 0, 0, V, slc, slc).entries)
        counts.append(eigencount.counting_functions(ev, lam)[0])
    n1, n2, n12 = counts
    ok = abs(n12 - n1 - n2) <= 0.05 * (n1 + n2) + 2
    return ok, {"n1": n1, "n2": n2, "n12": n12}


def run_selftest(seed: int = 0, quick: bool = False, threads: int = 1):
    """Run every property; returns a list of PropertyResult in a fixed order.

    Each stochastic property draws from its own stream derived from
    ``seed``, so results do not depend on ``threads``.
    """
    rng = lambda k: np.random.default_rng([seed, k])
    checks = [
        ("laguerre_bound", lambda: check_laguerre_bound()),
        ("incomplete_gamma", check_incomplete_gamma),
        ("orthonormality", lambda: check_orthonormality(alphas=(-10, 0, 7, 150) if quick else
                                                        (-10, -3, 0, 1, 7, 40, 150, 500))),
        ("trace_identity", check_trace),
        ("radial_vs_dense", lambda: check_radial_vs_dense((2.0, 5.0) if quick else (2.0, 5.0, 10.0))),
        ("spectral_containment", check_containment),
        ("inertia_vs_eig", lambda: check_inertia(rng(1))),
        ("kyfan", lambda: check_kyfan(rng(2), 100 if quick else 500)),
        ("localization", check_localization),
        ("hankel_decay", check_hankel),
        ("A_equals_B", lambda: check_A_equals_B(rng(3), 5 if quick else 20)),
        ("tile_additivity", check_tile_additivity),
    ]

    def run(item):
        name, fn = item
        start = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed property, not a crashed suite
            ok, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
        return PropertyResult(name, bool(ok), detail, time.perf_counter() - start)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, checks))
    return [run(c) for c in checks]
