import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from steklov_lab.errors import InputError, NumericError
from steklov_lab.numkit import (
    JACOBI_MAX_ORDER,
    eigh_dense,
    pcg,
    schur_complement,
    solve_spd,
    sparse_from_upper,
    symmetrize,
)


def _random_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return a + a.T


@pytest.mark.parametrize("method", ["jacobi", "lapack"])
def test_eigh_small_cases(method):
    w, _ = eigh_dense(np.diag([3.0, 1.0, 2.0]), method=method)
    assert np.allclose(w, [1, 2, 3], atol=1e-14)
    w, v = eigh_dense(np.array([[0.0, 1.0], [1.0, 0.0]]), method=method)
    assert np.allclose(w, [-1, 1], atol=1e-14)
    assert np.allclose(np.abs(v), np.sqrt(0.5))


@pytest.mark.parametrize("method", ["jacobi", "lapack"])
def test_eigh_random_residual(method):
    a = _random_symmetric(10, 11)
    w, v = eigh_dense(a, method=method)
    assert np.abs(a @ v - v * w).max() <= 1e-10
    assert np.abs(v.T @ v - np.eye(10)).max() <= 1e-12
    assert np.all(np.diff(w) >= 0)


def test_jacobi_matches_lapack():
    a = _random_symmetric(JACOBI_MAX_ORDER, 3)
    wj, vj = eigh_dense(a, method="jacobi")
    wl, vl = eigh_dense(a, method="lapack")
    assert np.allclose(wj, wl, atol=1e-10)
    # canonical signs make simple eigenvectors comparable
    assert np.allclose(vj, vl, atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_eigh_invariants(n, seed):
    a = _random_symmetric(n, seed)
    w, v = eigh_dense(a, method="jacobi")
    assert abs(w.sum() - np.trace(a)) <= 1e-10 * (1 + np.abs(a).sum())
    assert np.abs(a @ v - v * w).max() <= 1e-9 * (1 + np.abs(a).max())


def test_eigh_rejects_bad_input():
    with pytest.raises(InputError):
        eigh_dense(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(InputError):
        eigh_dense(np.array([[np.nan]]))
    with pytest.raises(InputError):
        eigh_dense(np.eye(2), method="qr")
    w, v = eigh_dense(np.zeros((0, 0)))
    assert w.size == 0


def test_symmetrize_averages():
    m = np.array([[1.0, 2.0 + 1e-12], [2.0, 1.0]])
    s = symmetrize(m)
    assert s[0, 1] == s[1, 0]


def test_solve_examples():
    assert np.allclose(solve_spd(np.eye(2), [5.0, 7.0]), [5, 7])
    x = solve_spd(np.array([[2.0, -1.0], [-1.0, 2.0]]), [1.0, 0.0])
    assert np.allclose(x, [2 / 3, 1 / 3], atol=1e-14)
    assert np.allclose(solve_spd(np.array([[4.0]]), [8.0]), [2.0])
    assert np.array_equal(solve_spd(np.eye(3), np.zeros(3)), np.zeros(3))


def test_solve_reports_pivot():
    a = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(NumericError) as info:
        solve_spd(a, [1.0, 1.0, 1.0])
    assert info.value.pivot == 2
    singular = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(NumericError):
        solve_spd(singular, [1.0, 0.0])


def _poisson_1d(n):
    return sparse.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()


def test_pcg_large_system():
    n = 800
    m = _poisson_1d(n)
    rhs = np.random.default_rng(0).standard_normal(n)
    x = solve_spd(m, rhs)
    assert np.linalg.norm(m @ x - rhs) / np.linalg.norm(rhs) <= 1e-10


def test_pcg_errors():
    with pytest.raises(NumericError):
        pcg(sparse.diags([1.0, -1.0]), np.ones(2))
    with pytest.raises(NumericError) as info:
        pcg(_poisson_1d(200), np.ones(200), maxiter=3)
    assert info.value.iterations == 3


def test_schur_examples():
    path = np.array([[1.0, -1, 0], [-1, 2, -1], [0, -1, 1]])
    s = schur_complement(path, [0, 2])
    assert np.allclose(s, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)
    assert np.allclose(schur_complement(path, [0, 1, 2]), path)
    star = np.array([[3.0, -1, -1, -1], [-1, 1, 0, 0], [-1, 0, 1, 0], [-1, 0, 0, 1]])
    assert np.allclose(schur_complement(star, [1, 2, 3]), np.eye(3) - np.ones((3, 3)) / 3, atol=1e-15)


def test_schur_sparse_path_matches_dense():
    # interior larger than the dense threshold goes through sparse LU
    n = 700
    m = _poisson_1d(n) + sparse.identity(n) * 0.01
    keep = [0, n // 2, n - 1]
    s = schur_complement(m, keep)
    dense = m.toarray()
    inner = [i for i in range(n) if i not in keep]
    ref = dense[np.ix_(keep, keep)] - dense[np.ix_(keep, inner)] @ np.linalg.solve(
        dense[np.ix_(inner, inner)], dense[np.ix_(inner, keep)]
    )
    assert np.allclose(s, ref, atol=1e-10)


def test_schur_errors():
    with pytest.raises(InputError):
        schur_complement(np.eye(3), [0, 0])
    with pytest.raises(InputError):
        schur_complement(np.eye(3), [5])
    floating = np.array([[1.0, 0, 0], [0, 0, 0], [0, 0, 1]])
    with pytest.raises(NumericError):
        schur_complement(floating, [0, 2])


def test_sparse_from_upper():
    m = sparse_from_upper(3, [0, 0, 1], [0, 2, 1], [1.0, 5.0, 2.0])
    assert np.array_equal(m.toarray(), [[1, 0, 5], [0, 2, 0], [5, 0, 0]])
    with pytest.raises(InputError):
        sparse_from_upper(2, [1], [0], [1.0])
    with pytest.raises(InputError):
        sparse_from_upper(2, [0, 0], [1, 1], [1.0, 2.0])
