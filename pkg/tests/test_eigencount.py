import numpy as np
import pytest

from landau_spectra import eigencount as ec
from landau_spectra.errors import DomainError, ShapeError


def random_hermitian(rng, n, complex_=True):
    A = rng.standard_normal((n, n))
    if complex_:
        A = A + 1j * rng.standard_normal((n, n))
    return 0.5 * (A + A.conj().T)


def test_diagonal_matrix():
    res = ec.hermitian_eigenvalues(np.diag([3.0, -1.0, 2.0]))
    np.testing.assert_allclose(res.eigenvalues, [-1.0, 2.0, 3.0], atol=1e-15)
    assert res.method == "full_eig"


def test_pauli_x():
    np.testing.assert_allclose(ec.hermitian_eigenvalues([[0, 1], [1, 0]]).eigenvalues, [-1, 1], atol=1e-15)


@pytest.mark.parametrize("n,complex_", [(1, False), (7, False), (50, True), (120, True)])
def test_eigenvalues_match_numpy(rng, n, complex_):
    M = random_hermitian(rng, n, complex_)
    ev = ec.hermitian_eigenvalues(M).eigenvalues
    np.testing.assert_allclose(ev, np.linalg.eigvalsh(M), atol=1e-11 * max(1, np.linalg.norm(M)))
    assert np.sum(ev) == pytest.approx(np.trace(M).real, rel=1e-9, abs=1e-9)
    assert np.all(np.diff(ev) >= 0)


def test_eigenvector_residuals(rng):
    M = random_hermitian(rng, 40)
    w, V = ec.hermitian_eigensystem(M)
    res = np.linalg.norm(M @ V - V * w, axis=0)
    assert np.max(res) <= 1e-9 * np.linalg.norm(M)


def test_degenerate_and_graded():
    M = np.diag([1.0, 1.0, 1.0, 1e-14, 1e8])
    np.testing.assert_allclose(ec.hermitian_eigenvalues(M).eigenvalues, np.sort(np.diag(M)), rtol=1e-12)


def test_non_hermitian_rejected():
    with pytest.raises(ShapeError):
        ec.hermitian_eigenvalues([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ShapeError):
        ec.hermitian_eigenvalues(np.zeros((2, 3)))


def test_inertia_examples():
    assert ec.inertia_below(np.diag([1.0, 2.0, 3.0]), 2.5) == 2
    assert ec.inertia_below(np.diag([1.0, 2.0, 3.0]), 0.0) == 0


def test_inertia_matches_full_eig(rng):
    for _ in range(3):
        M = random_hermitian(rng, 100)
        ev = np.linalg.eigvalsh(M)
        for eta in rng.uniform(ev[0] - 1, ev[-1] + 1, 20):
            assert ec.inertia_below(M, eta) == int(np.sum(ev < eta))


def test_inertia_zero_pivots_need_pivoting():
    # zero diagonal forces 2x2 pivots
    M = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 2.0], [0.0, 2.0, 0.0]])
    assert ec.inertia_below(M, 0.5) == int(np.sum(np.linalg.eigvalsh(M) < 0.5))


def test_robust_count_and_check(rng):
    M = random_hermitian(rng, 30)
    eta = 0.3
    res = ec.count_check(M, eta)
    assert res.count_below == ec.robust_count_below(M, eta) == int(np.sum(np.linalg.eigvalsh(M) < eta))


def test_counting_functions():
    spec = ec.SpectrumResult(np.array([-2.0, -0.5, 0.1, 0.7, 3.0]))
    assert ec.counting_functions(spec, 0.6) == (2, 1)
    with pytest.raises(DomainError):
        ec.counting_functions(spec, 0.0)


def test_singular_values_match_numpy(rng):
    M = rng.standard_normal((12, 7)) + 1j * rng.standard_normal((12, 7))
    np.testing.assert_allclose(ec.singular_values(M), np.linalg.svd(M, compute_uv=False), atol=1e-12)
    assert ec.n_singular(M, 1.0) == int(np.sum(np.linalg.svd(M, compute_uv=False) > 1.0))


def test_kyfan_inequalities_hold(rng):
    for _ in range(50):
        K1 = random_hermitian(rng, 15)
        K2 = random_hermitian(rng, 15)
        lam1, lam2 = rng.uniform(0.1, 3.0, 2)
        assert all(ec.kyfan_check(K1, K2, lam1, lam2))


def test_counting_examples():
    assert ec.counting_functions(np.array([-2.0, -0.5, 0.5, 2.0]), 1.0) == (1, 1)
    assert ec.counting_functions(np.array([-2.0, 2.0]), 5.0) == (0, 0)


def test_disk_toeplitz_median_count():
    from landau_spectra import landau
    from landau_spectra.landau import BasisSlice, LandauModel
    from landau_spectra.potentials import AnnulusStep
    from landau_spectra.specfun import reg_lower_inc_gamma
    m = LandauModel(1.0)
    disk = AnnulusStep(0, 1, 1)
    s = BasisSlice.for_potential(m, 0, disk, 4.0)
    ev = ec.hermitian_eigenvalues(landau.assemble_toeplitz(m, 0, 0, disk, s, s).entries)
    n_plus, _ = ec.counting_functions(ev, 0.5)
    assert n_plus == sum(reg_lower_inc_gamma(j + 1, 8.0) > 0.5 for j in range(200)) == 8


def test_singular_value_examples(rng):
    assert np.all(ec.singular_values(np.zeros((3, 3))) == 0)
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    np.testing.assert_allclose(ec.singular_values(Q), 1.0, atol=1e-12)
    M = rng.standard_normal((20, 10))
    gram = np.sqrt(np.linalg.eigvalsh(M.T @ M))[::-1]
    np.testing.assert_allclose(ec.singular_values(M), gram, atol=1e-10)


def test_kyfan_trivial_cases(rng):
    K = random_hermitian(rng, 10)
    assert all(ec.kyfan_check(K, np.zeros_like(K), 0.3, 0.4))
    assert all(ec.kyfan_check(K, -K, 0.5, 0.5))


def test_weyl_continuity(rng):
    M = random_hermitian(rng, 40)
    E = random_hermitian(rng, 40)
    E *= 1e-8 / np.linalg.norm(E, 2)
    d = ec.hermitian_eigenvalues(M + E).eigenvalues - ec.hermitian_eigenvalues(M).eigenvalues
    assert np.max(np.abs(d)) <= 1e-8 * (1 + 1e-6)
