"""Discrete Steklov spectrum of a graph with boundary.

The spectrum is computed from the Dirichlet-to-Neumann matrix, i.e. the
Schur complement of the Laplacian onto the boundary vertices. An
independent brute-force routine locates the same eigenvalues from the
inertia of the pencil ``L - sigma * P_B`` and serves as a test oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, OracleError, StructuralError
from .graphs import connected_components, dirichlet_energy, laplacian, zero_multiplicity
from .numkit import eigh_dense, schur_complement, solve_spd

BRUTEFORCE_MAX_VERTICES = 12


@dataclass
class SteklovSpectrum:
    """Steklov eigenvalues with their boundary modes and harmonic extensions.

    ``boundary_modes[:, k]`` is the ``k``-th eigenvector of the DtN matrix
    (orthonormal in the boundary inner product) and ``extensions[:, k]`` its
    harmonic extension to every vertex.
    """

    sigmas: np.ndarray
    boundary: tuple
    boundary_modes: np.ndarray
    extensions: np.ndarray
    zero_multiplicity: int
    residuals: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(
            {
                "sigmas": [float(s) for s in self.sigmas],
                "boundary": list(self.boundary),
                "residuals": {k: float(v) for k, v in self.residuals.items()},
                "zero_multiplicity": self.zero_multiplicity,
            }
        )


def _check_interior_reaches_boundary(g):
    count, labels = connected_components(g)
    touched = set(labels[list(g.boundary)].tolist())
    for comp in range(count):
        if comp not in touched:
            members = np.nonzero(labels == comp)[0]
            raise StructuralError(
                f"interior component {comp} (vertices {members[:10].tolist()}"
                f"{'...' if members.size > 10 else ''}) has no path to the boundary"
            )


def dtn_matrix(g):
    """Dirichlet-to-Neumann matrix, rows and columns ordered as ``g.boundary``."""
    _check_interior_reaches_boundary(g)
    return schur_complement(laplacian(g), list(g.boundary))


def harmonic_extension(g, boundary_values):
    """Extend boundary values to the vertex function minimizing the Dirichlet energy."""
    vals = np.asarray(boundary_values, dtype=float)
    nb = len(g.boundary)
    if vals.shape[0] != nb:
        raise InputError(f"expected {nb} boundary values, got {vals.shape[0]}")
    _check_interior_reaches_boundary(g)
    out = np.zeros((g.n_vertices,) + vals.shape[1:])
    bnd = list(g.boundary)
    inner = list(g.interior)
    out[bnd] = vals
    if inner:
        lap = laplacian(g)
        l_ii = lap[inner][:, inner]
        rhs = -(lap[inner][:, bnd] @ vals)
        if rhs.ndim == 1:
            out[inner] = solve_spd(l_ii, rhs)
        else:
            out[inner] = np.column_stack([solve_spd(l_ii, rhs[:, k]) for k in range(rhs.shape[1])])
    return out


def steklov_spectrum(g, method="auto"):
    """All ``|B|`` Steklov eigenvalues of ``g`` in ascending order."""
    dtn = dtn_matrix(g)
    sig, modes = eigh_dense(dtn, method=method)
    max_deg = g.degrees().max(initial=0)
    zero_tol = 1e-9 * (1.0 + max_deg)
    nzero = zero_multiplicity(sig, max_deg)
    sig = np.where(np.abs(sig) <= zero_tol, 0.0, sig)
    ext = harmonic_extension(g, modes)
    lap = laplacian(g)
    inner = list(g.interior)
    harm_res = float(np.abs((lap @ ext)[inner]).max(initial=0.0))
    energies = np.array([dirichlet_energy(g, ext[:, k]) for k in range(ext.shape[1])])
    rayleigh_res = float(np.abs(energies - sig).max(initial=0.0))
    return SteklovSpectrum(
        sigmas=sig,
        boundary=g.boundary,
        boundary_modes=modes,
        extensions=ext,
        zero_multiplicity=nzero,
        residuals={"harmonicity": harm_res, "rayleigh": rayleigh_res},
    )


def steklov_sigmas(g, count=None):
    """Eigenvalues only; cheaper than :func:`steklov_spectrum` for large boundaries."""
    sig, _ = eigh_dense(dtn_matrix(g))
    max_deg = g.degrees().max(initial=0)
    sig = np.where(np.abs(sig) <= 1e-9 * (1.0 + max_deg), 0.0, sig)
    return sig if count is None else sig[:count]


def _count_below(lap, bmask, sigma):
    # Inertia: negatives of L - sigma*P_B equal the number of Steklov values below sigma.
    m = lap - sigma * np.diag(bmask)
    w = np.linalg.eigvalsh(m)
    scale = 1.0 + np.abs(m).sum(axis=1).max()
    return int(np.sum(w < -1e-13 * scale))


def steklov_bruteforce(g, grid_points=400, tol=1e-12):
    """Steklov eigenvalues from the pencil ``L - sigma * diag(1_B)``.

    The count of eigenvalues below ``sigma`` is read off the inertia of the
    full pencil matrix (its negative eigenvalues change exactly where
    ``det(L - sigma P_B)`` vanishes). The scan runs over
    ``[-1, 2 * max_degree + 1]`` and each jump is refined by bisection.
    """
    if g.n_vertices > BRUTEFORCE_MAX_VERTICES:
        raise InputError(f"brute-force oracle is limited to {BRUTEFORCE_MAX_VERTICES} vertices")
    _check_interior_reaches_boundary(g)
    lap = laplacian(g).toarray()
    bmask = np.zeros(g.n_vertices)
    bmask[list(g.boundary)] = 1.0
    nb = len(g.boundary)
    hi = 2.0 * g.degrees().max(initial=0) + 1.0
    grid = np.linspace(-1.0, hi, grid_points)
    counts = np.array([_count_below(lap, bmask, s) for s in grid])
    if counts[0] != 0 or counts[-1] != nb:
        raise OracleError(
            f"scan on [{grid[0]}, {grid[-1]}] with {grid_points} points found "
            f"{counts[-1] - counts[0]} roots, expected {nb}"
        )
    roots = []
    for j in range(1, nb + 1):
        k = int(np.argmax(counts >= j))
        lo, up = grid[k - 1], grid[k]
        while up - lo > tol:
            mid = 0.5 * (lo + up)
            if _count_below(lap, bmask, mid) >= j:
                up = mid
            else:
                lo = mid
        roots.append(0.5 * (lo + up))
    out = np.array(roots)
    if len(out) != nb:
        raise OracleError(f"located {len(out)} roots, expected {nb}")
    return out
