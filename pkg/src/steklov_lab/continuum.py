"""Continuum side: P1 finite elements for the Steklov problem and cylinder formulas."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import cholesky, solve_triangular
from scipy.sparse import csgraph
from scipy.sparse import linalg as spla

from .errors import InputError, NumericError, StructuralError
from .mesh import MIN_TRIANGLE_AREA, node_adjacency, stretch
from .numkit import eigh_dense, schur_complement

#: Above this many boundary nodes ``fem_steklov`` switches to shift-invert Lanczos.
DENSE_BOUNDARY_MAX = 1200
LANCZOS_SHIFT = -1.0


def assemble_stiffness(mesh):
    """P1 stiffness matrix ``K`` with ``u^T K u`` the Dirichlet integral."""
    p = mesh.tri_coords
    area = mesh.triangle_areas()
    bad = np.nonzero(area < MIN_TRIANGLE_AREA)[0]
    if bad.size:
        raise StructuralError(f"degenerate triangle {int(bad[0])} (area {area[bad[0]]:.3e})")
    # b_i = y_j - y_k, c_i = x_k - x_j over cyclic (i, j, k)
    b = np.stack([p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1], p[:, 0, 1] - p[:, 1, 1]], axis=1)
    c = np.stack([p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0], p[:, 1, 0] - p[:, 0, 0]], axis=1)
    ke = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4.0 * area[:, None, None])
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    k = sparse.csr_matrix((ke.ravel(), (rows, cols)), shape=(n, n))
    return (0.5 * (k + k.T)).tocsr()


def assemble_boundary_mass(mesh, consistent=False):
    """1-D P1 boundary mass; lumped (``h/2`` per endpoint) unless ``consistent``."""
    e = mesh.boundary_edges
    h = mesh.boundary_lengths
    n = mesh.n_nodes
    if consistent:
        rows = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 0], e[:, 1], e[:, 1], e[:, 0]])
        vals = np.concatenate([h / 3, h / 3, h / 6, h / 6])
    else:
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = rows
        vals = np.concatenate([h / 2, h / 2])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass
class FemSteklovResult:
    sigmas: np.ndarray
    boundary_nodes: np.ndarray
    traces: np.ndarray
    extensions: np.ndarray
    mesh_stats: dict
    residuals: dict = field(default_factory=dict)
    method: str = "schur"
    seconds: float = 0.0

    def to_dict(self):
        return {
            "sigmas": [float(s) for s in self.sigmas],
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "mesh": self.mesh_stats,
            "method": self.method,
            "seconds": round(self.seconds, 3),
        }


def _check_components_touch_boundary(mesh, bnodes):
    ncomp, labels = csgraph.connected_components(node_adjacency(mesh), directed=False)
    touched = set(labels[bnodes].tolist())
    for comp in range(ncomp):
        if comp not in touched:
            raise StructuralError(f"mesh component {comp} has no boundary (floating interior block)")


def fem_steklov(mesh, count=6, method="auto", consistent_mass=False):
    """Lowest ``count`` Steklov eigenvalues of the P1 discretization.

    ``method="schur"`` forms the dense DtN matrix and reduces the pencil
    with the Cholesky factor of the boundary mass; ``method="lanczos"``
    applies the same reduction implicitly with a sparse factorization of
    ``K - s M`` (``s < 0``) and ARPACK. ``auto`` picks by boundary size.
    """
    t0 = time.perf_counter()
    bnodes = mesh.boundary_nodes()
    nb = bnodes.size
    if nb == 0:
        raise InputError("mesh has no boundary")
    if not 1 <= count <= nb:
        raise InputError(f"count must lie in [1, {nb}]")
    _check_components_touch_boundary(mesh, bnodes)
    k = assemble_stiffness(mesh)
    mass = assemble_boundary_mass(mesh, consistent=consistent_mass)
    m_bb = mass[bnodes][:, bnodes].toarray()
    if method == "auto":
        method = "schur" if nb <= DENSE_BOUNDARY_MAX or consistent_mass else "lanczos"
    if method == "schur":
        dtn = schur_complement(k, bnodes)
        low = cholesky(m_bb, lower=True)
        c = solve_triangular(low, solve_triangular(low, dtn, lower=True).T, lower=True)
        w, y = eigh_dense(0.5 * (c + c.T))
        sig = w[:count]
        traces = solve_triangular(low.T, y[:, :count], lower=False)
    elif method == "lanczos":
        if consistent_mass:
            raise InputError("the Lanczos path supports the lumped boundary mass only")
        sig, traces = _lanczos(k, mass, bnodes, count)
    else:
        raise InputError(f"unknown FEM method {method!r}")
    res, ext = _residuals(k, mass, bnodes, sig, traces)
    stats = {
        "nodes": int(mesh.n_nodes),
        "triangles": int(mesh.n_triangles),
        "boundary_nodes": int(nb),
        "boundary_length": float(mesh.boundary_lengths.sum()),
        "area": mesh.area(),
    }
    return FemSteklovResult(
        sigmas=np.asarray(sig, dtype=float),
        boundary_nodes=bnodes,
        traces=traces,
        extensions=ext,
        mesh_stats=stats,
        residuals=res,
        method=method,
        seconds=time.perf_counter() - t0,
    )


def _lanczos(k, mass, bnodes, count):
    n = k.shape[0]
    shifted = (k - LANCZOS_SHIFT * mass).tocsc()
    lu = spla.splu(shifted)
    d = mass.diagonal()[bnodes]
    root = np.sqrt(d)
    nb = bnodes.size

    def apply(v):
        full = np.zeros(n)
        full[bnodes] = root * v
        return root * lu.solve(full)[bnodes]

    op = spla.LinearOperator((nb, nb), matvec=apply, dtype=float)
    # nu = 1 / (sigma - shift): the largest nu are the smallest sigma
    v0 = np.ones(nb) / np.sqrt(nb)
    nu, vec = spla.eigsh(op, k=count, which="LA", v0=v0, tol=1e-12)
    order = np.argsort(-nu)
    nu, vec = nu[order], vec[:, order]
    sig = LANCZOS_SHIFT + 1.0 / nu
    return sig, vec / root[:, None]


def _residuals(k, mass, bnodes, sig, traces):
    n = k.shape[0]
    inner = np.setdiff1d(np.arange(n), bnodes)
    ext = np.zeros((n, traces.shape[1]))
    ext[bnodes] = traces
    if inner.size:
        k_ii = k[inner][:, inner].tocsc()
        rhs = -(k[inner][:, bnodes] @ traces)
        ext[inner] = spla.splu(k_ii).solve(rhs)
    energy = np.einsum("ij,ij->j", ext, k @ ext)
    bmass = np.einsum("ij,ij->j", ext, mass @ ext)
    rayleigh = float(np.max(np.abs(energy - sig * bmass) / np.maximum(bmass, 1e-300)))
    normal = (k @ ext)[bnodes] - sig * (mass @ ext)[bnodes]
    return {"rayleigh": rayleigh, "pencil": float(np.abs(normal).max(initial=0.0))}, ext


# --- analytic cylinder ------------------------------------------------------


@dataclass(frozen=True)
class CylinderModel:
    """Product cylinder ``Sigma x [0, length]``; ``lambdas`` are the cross-section eigenvalues."""

    lambdas: tuple
    multiplicities: tuple
    length: float = 1.0

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if len(self.lambdas) != len(self.multiplicities):
            raise InputError("one multiplicity per eigenvalue")
        if lam.size == 0 or lam[0] != 0.0 or np.any(np.diff(lam) <= 0):
            raise InputError("eigenvalues must start at 0 and increase strictly")
        if self.length <= 0:
            raise InputError("cylinder length must be positive")

    @classmethod
    def circle(cls, circumference=1.0, length=1.0, modes=20):
        lam = tuple((2 * np.pi * j / circumference) ** 2 for j in range(modes + 1))
        mult = (1,) + (2,) * modes
        return cls(lam, mult, float(length))


def mode_residual(lam, length, sigma):
    """Steklov defect at ``r = length`` of the mode with ``a(0) = 1, a'(0) = -sigma``.

    Zero (up to scaling) exactly when ``sigma`` is a Steklov value of the mode.
    """
    if lam == 0:
        a = 1.0 - sigma * length
        da = -sigma
    else:
        x = np.sqrt(lam)
        a = np.cosh(x * length) - sigma / x * np.sinh(x * length)
        da = x * np.sinh(x * length) - sigma * np.cosh(x * length)
    scale = 1.0 + abs(sigma) + (np.cosh(np.sqrt(lam) * length) if lam else 1.0) * (1 + np.sqrt(lam) + abs(sigma))
    return float((da - sigma * a) / scale)


def cylinder_steklov_analytic(c, count):
    """Lowest ``count`` Steklov values of the cylinder with both ends as boundary."""
    out = []
    half = c.length / 2.0
    for lam, mult in zip(c.lambdas, c.multiplicities):
        if lam == 0:
            vals = (0.0, 2.0 / c.length)
        else:
            x = np.sqrt(lam)
            vals = (x * np.tanh(x * half), x / np.tanh(x * half))
        out += [v for v in vals for _ in range(mult)]
    out = np.sort(np.array(out))
    if count > out.size:
        raise InputError(f"model resolves only {out.size} values; add cross-section modes")
    return out[:count]


@dataclass
class EnergyRatio:
    ratio: float
    tangential: float
    collar: float
    flagged: bool = False


def _collar_bracket(x, sigma):
    return (1 + sigma**2 / x**2) * np.sinh(2 * x) / (2 * x) - sigma / x**2 * (np.cosh(2 * x) - 1)


def energy_ratio_check(c, mode, sigma):
    """Tangential boundary energy over collar energy for one Fourier mode.

    Uses ``a(0) = 1`` and the mode profile ``a(r) = cosh(xr) - (sigma/x) sinh(xr)``
    on a collar of depth 1, ``x = sqrt(lambda)``. A ``lambda = 0`` mode carries no
    tangential energy and is flagged with ratio 0.
    """
    lam = float(c.lambdas[mode])
    if lam == 0:
        return EnergyRatio(0.0, 0.0, float(sigma**2), flagged=True)
    x = np.sqrt(lam)
    collar = lam * _collar_bracket(x, sigma)
    return EnergyRatio(lam / collar, lam, float(collar))


def combination_ratio(lambdas, sigmas, coeffs):
    """Energy ratio of ``sum a_i F_i`` built from distinct Fourier modes.

    Distinct cross-section modes are orthogonal in both energies, so the
    ratio is ``sum a_i^2 lambda_i / sum a_i^2 lambda_i bracket_i``.
    """
    lam = np.asarray(lambdas, dtype=float)
    sig = np.asarray(sigmas, dtype=float)
    a2 = np.asarray(coeffs, dtype=float) ** 2
    x = np.sqrt(lam)
    num = np.sum(a2 * lam)
    den = np.sum(a2 * lam * _collar_bracket(x, sig))
    return float(num / den)


# --- perturbation -----------------------------------------------------------


def quasi_isometry_perturb(mesh, factor, axis=0):
    """Stretch chart coordinates along ``axis`` by ``factor >= 1``."""
    if factor < 1:
        raise InputError("stretch factor must be >= 1")
    if axis not in (0, 1):
        raise InputError("axis must be 0 or 1")
    return stretch(mesh, factor, axis)


def kokarev_ok(sigma2, length, genus):
    bound = 8 * np.pi * (genus + 1)
    return bool(sigma2 * length <= bound), float(bound)


def sigma_ratio_bracket(base, perturbed, factor, power=10):
    """Ratios ``perturbed / base`` and whether they lie in ``[A^-power, A^power]``."""
    base = np.asarray(base, dtype=float)
    pert = np.asarray(perturbed, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(base) > 1e-9, pert / base, 1.0)
    lo, hi = factor ** (-power), factor**power
    if not np.all(np.isfinite(ratio)):
        raise NumericError("non-finite sigma ratio")
    return ratio, bool(np.all((ratio >= lo - 1e-12) & (ratio <= hi + 1e-12)))
