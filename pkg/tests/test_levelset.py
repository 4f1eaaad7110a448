import math

import numpy as np
import pytest

from landau_spectra import levelset as ls
from landau_spectra.errors import DomainError, GapViolationError, InfiniteMeasureError
from landau_spectra.potentials import (ZERO, Gaussian, GridSampled, RadialStep,
                                       SectorTile, Sum, square)


def test_measure_between_examples(disk):
    assert ls.measure_between(disk, 0.5, 1.5).value == pytest.approx(math.pi, rel=1e-15)
    assert ls.measure_between(disk, 1.5, 2.5).value == 0.0
    for lam in (0.1, 0.5, 0.9):
        res = ls.measure_between(Gaussian(1, 1), lam, 1.1)
        assert res.value == pytest.approx(math.pi * math.log(1 / lam), rel=1e-12)
        assert res.method == "exact" and res.error_bound == 0.0


def test_measure_between_straddling_zero():
    with pytest.raises(InfiniteMeasureError):
        ls.measure_between(Gaussian(1, 1), -0.1, 0.2)


def test_measure_between_negative_side():
    V = RadialStep((0.0, 1.0, 2.0), (-1.0, -0.3))
    assert ls.measure_between(V, -0.5, -0.1).value == pytest.approx(3 * math.pi, rel=1e-14)


def test_sector_tile_measures():
    S = SectorTile(1.0, 4, {(1, 1): 1.0, (1, 2): -0.5})
    assert ls.sup_measure(S, 0.25, +1).value == pytest.approx(math.pi / 4, rel=1e-14)
    assert ls.sup_measure(S, 0.25, -1).value == pytest.approx(math.pi / 4, rel=1e-14)
    assert ls.sup_measure(S, 0.7, -1).value == 0.0


def test_sup_measure_examples(disk):
    assert ls.sup_measure(disk, 0.5, +1).value == pytest.approx(math.pi)
    for lam in (0.1, 1.0, 7.0):
        assert ls.sup_measure(disk, lam, -1).value == 0.0
    assert ls.sup_measure(Gaussian(2, 1), 1.0, +1).value == pytest.approx(math.pi * math.log(2), rel=1e-13)


def test_sup_measure_chebyshev(analytic_potentials):
    for V in analytic_potentials:
        l1 = V.norms().l1
        for lam in np.logspace(-3, 1, 30):
            for sign in (1, -1):
                assert ls.sup_measure(V, lam, sign).value <= l1 / lam * (1 + 1e-12)


def test_monotone_under_inclusion(rng, analytic_potentials):
    for V in analytic_potentials:
        for _ in range(250):
            lo, hi = np.sort(rng.uniform(0.01, 3.0, 2))
            a, b = lo + (hi - lo) * np.sort(rng.uniform(0, 1, 2))
            inner = ls.measure_between(V, a, b).value
            outer = ls.measure_between(V, lo, hi).value
            assert inner <= outer + 1e-12


def test_grid_method_brackets_exact():
    V = Sum((Gaussian(1.0, 0.6), Gaussian(0.5, 0.4, (0.5, 0.0))))
    grid = GridSampled.from_function(V, 4.0, 512, 256)
    res = ls.sup_measure(grid, 0.6, +1)
    assert res.method == "grid"
    # Sum of Gaussians is handled exactly or by its own grid; compare against dense sampling
    x = np.linspace(-4, 4, 2001)
    X, Y = np.meshgrid(x, x)
    brute = np.mean(V(X, Y) > 0.6) * 64.0
    assert abs(res.value - brute) <= res.error_bound + 0.01


def test_level_mass_examples(disk):
    r = ls.level_mass(disk, 1.0)
    assert r.value == pytest.approx(math.pi) and r.exceptional_flag
    r = ls.level_mass(disk, 0.3)
    assert r.value == 0.0 and not r.exceptional_flag
    r = ls.level_mass(Gaussian(1, 1), 0.5)
    assert r.value == pytest.approx(0.0, abs=1e-5) and not r.exceptional_flag


def test_script_A_examples(disk):
    s = ls.script_A(disk, 1.5, 2.5, 1.0)
    assert s.total == pytest.approx(0.5, rel=1e-15)
    assert s.terms[0] == (0, pytest.approx(0.5))
    assert ls.script_A(ZERO, 1.5, 2.5, 1.0).total == 0.0
    assert ls.script_A(disk.scaled(-2.0), 3.5, 4.5, 1.0).total == 0.0
    assert ls.script_A(disk.scaled(2.0), 3.5, 4.5, 1.0).total == 0.0


def test_script_A_term_enumeration(rng):
    # values 2.5 and 0.7 on shells of areas pi and 3 pi; windows in the gap (3, 5)
    V = RadialStep((0.0, 1.0, 2.0), (2.5, 0.7))
    for _ in range(20):
        lam1, lam2 = np.sort(rng.uniform(3.01, 4.99, 2))
        ref = 0.0
        for q in range(10):
            Lq = 2 * q + 1
            ref += (math.pi * (lam1 - Lq < 2.5 < lam2 - Lq) + 3 * math.pi * (lam1 - Lq < 0.7 < lam2 - Lq))
        assert ls.script_A(V, lam1, lam2, 1.0).total == pytest.approx(ref / (2 * math.pi), abs=1e-15)


def test_script_A_gap_violation(disk):
    with pytest.raises(GapViolationError):
        ls.script_A(disk, 0.5, 1.5, 1.0)


def test_script_B_examples(disk):
    assert ls.script_B(ZERO, ZERO, 0.25, 2.0, 1.0).total == 0.0
    s = ls.script_B(disk, disk, 0.5, 2.0, 1.0)
    assert s.terms[0] == (0, pytest.approx(0.5))
    assert s.total == pytest.approx(0.5)
    with pytest.raises(DomainError):
        ls.script_B(disk, disk, 1.0, 2.0, 1.0)


def test_A_equals_B(rng, analytic_potentials):
    from landau_spectra.selftest import random_window
    for V in analytic_potentials:
        Z = square(V)
        for _ in range(5):
            B, lam1, lam2 = random_window(rng)
            a, b = 0.5 * (lam1 + lam2), 0.5 * (lam2 - lam1)
            A = ls.script_A(V, lam1, lam2, B).total
            Bv = ls.script_B(V, Z, b * b, a, B).total
            assert Bv == pytest.approx(A, rel=1e-9, abs=1e-14)


def test_series_terms_disjoint(analytic_potentials):
    for V in analytic_potentials:
        s = ls.script_A(V, 2.2, 2.9, 1.0)
        dist = min(min(abs(2.2 - Lq), abs(2.9 - Lq)) for Lq in (1, 3, 5, 7))
        absV_area = ls.sup_measure(V, dist, 1).value + ls.sup_measure(V, dist, -1).value
        assert s.total * 2 * math.pi <= absV_area + 1e-12


def test_continuity_under_small_perturbation(disk):
    V = RadialStep((0.0, 1.0, 1.5), (1.0, 0.4))
    lam = 0.7
    base = ls.sup_measure(V, lam, 1).value
    for delta in (1e-2, 1e-3, 1e-4):
        Vd = Sum((V, Gaussian(delta, 1.0)))
        val = ls.sup_measure(Vd, lam, 1).value
        assert base - 1e-9 <= val <= ls.sup_measure(V, lam - 2 * delta, 1).value + 1e-9


def test_gap_helpers():
    assert ls.gap_index(0.5, 1.0) == -1
    assert ls.gap_index(2.0, 1.0) == 0
    assert ls.eta0(2.0, 1.0) == pytest.approx(1.0)
    assert ls.check_gap(1.5, 2.5, 1.0) == 0


def test_one_sided_flags_plateau(disk):
    assert ls.one_sided(disk, 0.5, 1.0)["disagree"]
    assert not ls.one_sided(disk, 0.5, 1.5)["disagree"]
