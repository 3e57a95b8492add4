"""Numerical kernels: symmetric eigensolver, SPD solves and Schur complements.

Dense symmetric matrices are plain ``numpy`` arrays; sparse symmetric matrices
are ``scipy.sparse`` matrices holding both triangles.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.linalg import lapack
from scipy.sparse import linalg as spla

from .errors import InputError, NumericError

#: Largest order handled by the Jacobi eigensolver when ``method="auto"``.
JACOBI_MAX_ORDER = 64
#: Below this order SPD systems are factored densely.
DENSE_SOLVE_MAX_ORDER = 500
#: Relative asymmetry tolerated before an input is rejected.
ASYMMETRY_TOL = 1e-8

CG_RTOL = 1e-12
CG_MAXITER_FACTOR = 50
JACOBI_MAX_SWEEPS = 60


def sparse_from_upper(order, rows, cols, values):
    """Build a full symmetric CSR matrix from upper-triangle triplets.

    Duplicate ``(row, col)`` entries are rejected.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    if np.any(rows > cols):
        raise InputError("triplets must satisfy row <= col")
    if not np.all(np.isfinite(values)):
        raise InputError("non-finite matrix entry")
    keys = rows * order + cols
    if np.unique(keys).size != keys.size:
        raise InputError("duplicate (row, col) entry")
    off = rows != cols
    r = np.concatenate([rows, cols[off]])
    c = np.concatenate([cols, rows[off]])
    v = np.concatenate([values, values[off]])
    return sparse.csr_matrix((v, (r, c)), shape=(order, order))


def symmetrize(m):
    """Return ``(m + m.T) / 2`` after checking that ``m`` is nearly symmetric."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError("non-finite matrix entry")
    scale = np.abs(m).sum(axis=1).max(initial=0.0)
    defect = np.abs(m - m.T).max(initial=0.0)
    if defect > ASYMMETRY_TOL * max(scale, 1.0):
        raise InputError(f"matrix is not symmetric (defect {defect:.3e})")
    return 0.5 * (m + m.T)


def _round_robin(n):
    # Circle-method schedule: n-1 rounds of n/2 disjoint pairs covering every pair once.
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi(a, tol=1e-14, max_sweeps=JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi with a parallel (round-robin) ordering.

    Each round applies ``n/2`` disjoint plane rotations at once, so the work
    per round is a handful of vectorized row/column updates.
    """
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    padded = n + (n % 2)
    if padded != n:
        a = np.pad(a, ((0, 1), (0, 1)))
        v = np.pad(v, ((0, 1), (0, 1)))
        v[n, n] = 1.0
    rounds = _round_robin(padded)
    fro = np.linalg.norm(a)
    threshold = tol * max(fro, np.finfo(float).tiny)
    negligible = 1e-18 * max(fro, np.finfo(float).tiny)
    for sweep in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(a.diagonal()))
        if off <= threshold:
            w = a.diagonal()[:n].copy()
            return w, v[:n, :n]
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > negligible
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            tau = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            ap, aq = a[:, p].copy(), a[:, q]
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap, aq = a[p, :].copy(), a[q, :]
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
    raise NumericError(
        f"Jacobi eigensolver did not converge in {max_sweeps} sweeps",
        iterations=max_sweeps,
    )


def _canonical_signs(vectors):
    # First entry of largest magnitude is made positive.
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors) > np.abs(vectors).max(axis=0) * (1 - 1e-9), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def eigh_dense(m, method="auto"):
    """Eigen-decomposition of a dense symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and
    eigenvectors as orthonormal columns. ``method`` is ``"jacobi"``,
    ``"lapack"`` or ``"auto"`` (Jacobi up to :data:`JACOBI_MAX_ORDER`).
    """
    a = symmetrize(m)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_ORDER else "lapack"
    if method == "jacobi":
        w, v = _jacobi(a)
    elif method == "lapack":
        w, v = np.linalg.eigh(a)
    else:
        raise InputError(f"unknown eigensolver method {method!r}")
    order = np.argsort(w, kind="stable")
    return w[order], _canonical_signs(v[:, order])


def _dense_cholesky(a):
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NumericError(
            f"matrix is not positive definite (non-positive pivot at index {info - 1})",
            pivot=info - 1,
        )
    if info < 0:
        raise InputError("invalid argument passed to Cholesky")
    d = np.abs(c.diagonal())
    # Floating round-off can leave a tiny positive pivot on a singular block.
    small = np.nonzero(d * d <= 1e-13 * max(np.abs(a.diagonal()).max(), 1e-300))[0]
    if small.size:
        raise NumericError(
            f"matrix is numerically singular (pivot at index {small[0]})",
            pivot=int(small[0]),
        )
    return c


def _as_sparse(m):
    if sparse.issparse(m):
        return m.tocsr().astype(float)
    return sparse.csr_matrix(np.asarray(m, dtype=float))


def pcg(m, rhs, rtol=CG_RTOL, maxiter=None):
    """Conjugate gradient with a Jacobi (diagonal) preconditioner."""
    m = _as_sparse(m)
    b = np.asarray(rhs, dtype=float)
    n = b.shape[0]
    maxiter = CG_MAXITER_FACTOR * n if maxiter is None else maxiter
    diag = m.diagonal()
    bad = np.nonzero(diag <= 0)[0]
    if bad.size:
        raise NumericError(
            f"non-positive diagonal entry at index {bad[0]}", pivot=int(bad[0])
        )
    inv_d = 1.0 / diag
    bnorm = np.linalg.norm(b)
    x = np.zeros(n)
    if bnorm == 0:
        return x
    r = b.copy()
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    for it in range(maxiter):
        mp = m @ p
        curv = p @ mp
        if curv <= 0:
            raise NumericError(
                f"CG detected non-positive curvature at iteration {it}", iterations=it
            )
        alpha = rz / curv
        x += alpha * p
        r -= alpha * mp
        if np.linalg.norm(r) <= rtol * bnorm:
            return x
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NumericError(f"CG stalled after {maxiter} iterations", iterations=maxiter)


def solve_spd(m, rhs):
    """Solve ``m x = rhs`` for symmetric positive definite ``m``."""
    b = np.asarray(rhs, dtype=float)
    n = b.shape[0]
    if m.shape != (n, n):
        raise InputError(f"shape mismatch: matrix {m.shape}, rhs {b.shape}")
    if not np.any(b):
        return np.zeros_like(b)
    if n < DENSE_SOLVE_MAX_ORDER:
        a = m.toarray() if sparse.issparse(m) else np.asarray(m, dtype=float)
        a = symmetrize(a)
        c = _dense_cholesky(a)
        x, info = lapack.dpotrs(c, b, lower=1)
        return x
    return pcg(m, b)


class _InteriorSolver:
    """Factorization of the eliminated block, reused across right-hand sides."""

    def __init__(self, block):
        n = block.shape[0]
        self.n = n
        if n < DENSE_SOLVE_MAX_ORDER:
            self.dense = True
            self.factor = _dense_cholesky(symmetrize(block.toarray()))
        else:
            self.dense = False
            diag = block.diagonal()
            bad = np.nonzero(diag <= 0)[0]
            if bad.size:
                raise NumericError(
                    f"non-positive pivot at index {bad[0]}", pivot=int(bad[0])
                )
            try:
                self.factor = spla.splu(block.tocsc(), permc_spec="MMD_AT_PLUS_A")
            except RuntimeError as exc:
                raise NumericError(f"interior block is singular: {exc}") from exc
            self.block = block

    def solve(self, rhs):
        if self.dense:
            x, _ = lapack.dpotrs(self.factor, rhs, lower=1)
        else:
            x = self.factor.solve(rhs)
            res = np.linalg.norm(self.block @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
            if not np.isfinite(res) or res > 1e-8:
                raise NumericError(f"interior solve inaccurate (relative residual {res:.2e})")
        return x


def schur_complement(m, keep):
    """Dense Schur complement of ``m`` onto the indices in ``keep``.

    Computes ``M_kk - M_ki M_ii^{-1} M_ik`` where ``i`` is the complement of
    ``keep``. The output rows follow the order of ``keep``.
    """
    m = _as_sparse(m)
    n = m.shape[0]
    keep = np.asarray(keep, dtype=np.int64)
    if keep.size and (keep.min() < 0 or keep.max() >= n):
        raise InputError("keep index out of range")
    if np.unique(keep).size != keep.size:
        raise InputError("duplicate index in keep")
    mask = np.zeros(n, dtype=bool)
    mask[keep] = True
    inner = np.nonzero(~mask)[0]
    m_kk = m[keep][:, keep].toarray()
    if inner.size == 0:
        return symmetrize(m_kk)
    m_ii = m[inner][:, inner]
    m_ik = m[inner][:, keep].toarray()
    solver = _InteriorSolver(m_ii)
    x = solver.solve(m_ik)
    s = m_kk - m_ik.T @ x
    return 0.5 * (s + s.T)
