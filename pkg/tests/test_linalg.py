import numpy as np
import pytest

from mare import linalg
from mare.errors import NearSingularOperator, NullSpaceDimension, SignFailure, SingularMatrix


def test_linear_solve_matches_numpy():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(5, 5)) + 5 * np.eye(5)
    B = rng.normal(size=(5, 3))
    assert np.allclose(linalg.linear_solve(M, B), np.linalg.solve(M, B))
    b = rng.normal(size=5)
    assert linalg.linear_solve(M, b).shape == (5,)


def test_linear_solve_singular():
    M = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrix):
        linalg.linear_solve(M, np.ones(2))
    with pytest.raises(SingularMatrix):
        linalg.linear_solve(np.zeros((2, 2)), np.ones(2))


def test_linear_solve_rejects_non_finite():
    with pytest.raises(ValueError):
        linalg.linear_solve(np.array([[np.nan]]), np.ones(1))


def test_sort_descending():
    lams = np.array([-1, 2 - 1j, 2 + 1j, 0, 3])
    out = linalg.sort_descending(lams)
    assert list(out) == [3, 2 + 1j, 2 - 1j, 0, -1]


def _check_schur(M, sf):
    n = M.shape[0]
    assert np.allclose(sf.Q @ sf.T @ sf.Q.T, M, atol=1e-10)
    assert np.allclose(sf.Q.T @ sf.Q, np.eye(n), atol=1e-12)
    # quasi upper triangular
    assert np.allclose(np.tril(sf.T, -2), 0.0)


def test_ordered_schur_descending_real_parts():
    rng = np.random.default_rng(1)
    for _ in range(20):
        M = rng.normal(size=(7, 7))
        sf = linalg.ordered_real_schur(M)
        _check_schur(M, sf)
        re = sf.block_eigenvalues().real
        assert np.all(np.diff(re) <= 1e-10)
        expected = linalg.sort_descending(np.linalg.eigvals(M))
        assert np.allclose(np.sort_complex(sf.block_eigenvalues()), np.sort_complex(expected))


def test_ordered_schur_keeps_conjugate_pairs():
    # eigenvalues 1 +- 2i, 3, -1
    M = np.array([[1.0, -2.0, 0, 0], [2.0, 1.0, 0, 0], [0, 0, 3.0, 0], [0, 0, 0, -1.0]])
    Q = np.linalg.qr(np.random.default_rng(2).normal(size=(4, 4)))[0]
    A = Q @ M @ Q.T
    sf = linalg.ordered_real_schur(A)
    _check_schur(A, sf)
    assert sf.blocks() == [(0, 1), (1, 2), (3, 1)]
    ev = sf.block_eigenvalues()
    assert np.isclose(ev[0], 3)
    assert np.isclose(ev[1], 1 + 2j) and np.isclose(ev[2], 1 - 2j)


def test_ordered_schur_custom_key():
    M = np.diag([1.0, 2.0, 3.0])
    sf = linalg.ordered_real_schur(M, key=lambda e: -e[0].real)
    assert np.allclose(np.diag(sf.T), [1, 2, 3])


def test_solve_sylvester_against_kronecker():
    rng = np.random.default_rng(3)
    P = rng.normal(size=(3, 3)) + 4 * np.eye(3)
    Q = rng.normal(size=(2, 2)) + 4 * np.eye(2)
    C = rng.normal(size=(3, 2))
    X = linalg.solve_sylvester(P, Q, C)
    assert np.allclose(P @ X + X @ Q, C)
    Xk, cond = linalg.sylvester_kron(P, Q, C)
    assert np.allclose(X, Xk)
    assert np.isfinite(cond)


def test_solve_sylvester_singular_operator():
    P = np.diag([1.0, 2.0])
    Q = np.diag([-1.0])
    with pytest.raises(NearSingularOperator):
        linalg.solve_sylvester(P, Q, np.ones((2, 1)))


def test_spectral_radius_nonnegative():
    N = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.isclose(linalg.spectral_radius(N, nonnegative=True), 1.0)
    with pytest.raises(ValueError):
        linalg.spectral_radius(-N, nonnegative=True)
    # Perron root of a positive matrix: 2x2 closed form
    a, b, c, d = 1.0, 2.0, 3.0, 4.0
    rho = (a + d + np.sqrt((a - d) ** 2 + 4 * b * c)) / 2
    assert np.isclose(linalg.spectral_radius([[a, b], [c, d]], nonnegative=True), rho)


def test_null_rank_and_min_singular_value():
    assert linalg.null_rank(np.zeros((3, 3))) == 3
    assert linalg.null_rank(np.eye(3)) == 0
    assert linalg.null_rank(np.array([[1.0, 1.0], [1.0, 1.0]])) == 1
    assert np.isclose(linalg.min_singular_value(np.diag([3.0, 0.5])), 0.5)


def test_nonneg_null_vector():
    K = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0], [-1.0, 0.0, 1.0]])
    v = linalg.nonneg_null_vector(K, "right")
    u = linalg.nonneg_null_vector(K, "left")
    assert np.allclose(v, 1 / 3) and np.allclose(u, 1 / 3)
    assert np.isclose(v.sum(), 1.0)


def test_nonneg_null_vector_failures():
    with pytest.raises(NullSpaceDimension):
        linalg.nonneg_null_vector(np.zeros((2, 2)))
    with pytest.raises(NullSpaceDimension):
        linalg.nonneg_null_vector(np.eye(2))
    # null vector (1, -1) has mixed signs
    with pytest.raises(SignFailure):
        linalg.nonneg_null_vector(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(ValueError):
        linalg.nonneg_null_vector(np.eye(2), side="up")
