"""Finite metric spaces, rough isometries and the discretization distance bounds."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError
from .graphs import UNREACHABLE, hop_distance_matrix

METRIC_TOL = 1e-9
#: Grid of multiplicative constants scanned by :func:`fit_rough_constants`.
A_GRID = np.round(np.arange(1.0, 16.0 + 1e-9, 0.05), 10)


class FiniteMetricSpace:
    """Points ``0..n-1`` with a symmetric distance matrix."""

    def __init__(self, distances, check=True):
        d = np.asarray(distances, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InputError("distance matrix must be square")
        if check:
            if np.any(d < 0) or not np.all(np.isfinite(d)):
                raise InputError("distances must be finite and non-negative")
            if np.abs(d - d.T).max(initial=0.0) > METRIC_TOL:
                raise InputError("distance matrix is not symmetric")
            if np.abs(np.diag(d)).max(initial=0.0) > METRIC_TOL:
                raise InputError("distance matrix has a non-zero diagonal")
            n = d.shape[0]
            if n <= 400:
                # d[i,k] <= d[i,j] + d[j,k] for all triples
                viol = (d[:, None, :] - d[:, :, None] - d[None, :, :]).max(initial=0.0)
                if viol > METRIC_TOL:
                    raise InputError(f"triangle inequality violated by {viol:.3e}")
        self.d = d
        off = d + np.eye(d.shape[0])
        self.is_pseudo = bool(np.any(off <= METRIC_TOL))

    @property
    def n_points(self):
        return self.d.shape[0]

    @classmethod
    def from_points(cls, coords):
        x = np.asarray(coords, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        return cls(np.linalg.norm(x[:, None, :] - x[None, :, :], axis=-1))


@dataclass(frozen=True)
class RoughConstants:
    a: float = 1.0
    b: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if self.a < 1 or self.b < 0 or self.tau < 0:
            raise InputError(f"invalid rough-isometry constants {self}")


@dataclass
class RoughIsometryReport:
    holds: bool
    distortion_ok: bool
    covering_ok: bool
    worst_pair: tuple | None
    worst_pair_slack: float
    worst_pair_ratio: float
    worst_uncovered: int | None
    covering_radius: float

    def to_json(self):
        return json.dumps(asdict(self))


def _as_space(x):
    return x if isinstance(x, FiniteMetricSpace) else FiniteMetricSpace(x)


def verify_rough_isometry(x, y, phi, c):
    """Check both distortion inequalities on every pair and the covering condition.

    Balls are closed: ``y`` is covered when its distance to the image is at
    most ``tau``.
    """
    x, y = _as_space(x), _as_space(y)
    phi = np.asarray(phi, dtype=np.int64)
    if phi.shape != (x.n_points,):
        raise InputError("map must be defined on every point of X")
    dx = x.d
    dy = y.d[np.ix_(phi, phi)]
    lower = dx / c.a - c.b - dy
    upper = dy - (c.a * dx + c.b)
    slack = np.maximum(lower, upper)
    iu = np.triu_indices(x.n_points, 1)
    if iu[0].size:
        k = int(np.argmax(slack[iu]))
        i, j = int(iu[0][k]), int(iu[1][k])
        worst_slack = float(slack[i, j])
        worst_pair = (i, j)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dx > 0, np.maximum(dy / dx, dx / np.where(dy > 0, dy, np.nan)), 1.0)
        worst_ratio = float(np.nan_to_num(ratio[i, j], nan=np.inf))
    else:
        worst_slack, worst_pair, worst_ratio = -np.inf, None, 1.0
    to_image = y.d[:, phi].min(axis=1)
    radius = float(to_image.max(initial=0.0))
    far = int(np.argmax(to_image))
    distortion_ok = worst_slack <= METRIC_TOL
    covering_ok = radius <= c.tau + METRIC_TOL
    return RoughIsometryReport(
        holds=bool(distortion_ok and covering_ok),
        distortion_ok=bool(distortion_ok),
        covering_ok=bool(covering_ok),
        worst_pair=worst_pair,
        worst_pair_slack=worst_slack,
        worst_pair_ratio=worst_ratio,
        worst_uncovered=None if covering_ok else far,
        covering_radius=radius,
    )


class UnboundedDistortionError(InputError):
    def __init__(self, message, witness):
        super().__init__(message)
        self.witness = witness


def fit_rough_constants(x, y, phi, a_grid=A_GRID):
    """Fit rough-isometry constants for a given map.

    For a fixed ``a`` the smallest admissible ``b`` is the largest violation
    of the two affine inequalities, and it does not increase with ``a``.
    The returned ``a`` is the first grid value reaching the smallest ``b``
    available on the grid (so a map with bounded ratio gets ``b = 0`` at the
    first grid value above its ratio); ``tau`` is the exact covering radius.
    """
    x, y = _as_space(x), _as_space(y)
    phi = np.asarray(phi, dtype=np.int64)
    if phi.shape != (x.n_points,):
        raise InputError("map must be defined on every point of X")
    dx = x.d
    dy = y.d[np.ix_(phi, phi)]
    iu = np.triu_indices(x.n_points, 1)
    dx, dy = dx[iu], dy[iu]
    tau = float(y.d[:, phi].min(axis=1).max(initial=0.0))
    if dx.size == 0:
        return RoughConstants(float(a_grid[0]), 0.0, tau)
    bad = ~(np.isfinite(dx) & np.isfinite(dy))
    if bad.any():
        k = int(np.argmax(bad))
        raise UnboundedDistortionError(
            "infinite distance: no grid value of a bounds the distortion",
            witness=(int(iu[0][k]), int(iu[1][k])),
        )

    def b_needed(a):
        return max(float(np.max(dx / a - dy)), float(np.max(dy - a * dx)), 0.0)

    floor = b_needed(float(a_grid[-1]))
    for a in a_grid:
        b = b_needed(float(a))
        if b <= floor + METRIC_TOL:
            return RoughConstants(float(a), b if b > METRIC_TOL else 0.0, tau)
    raise AssertionError("unreachable: the last grid value always qualifies")


@dataclass
class DiscretizationBoundsReport:
    holds: bool
    lower_ok: bool
    upper_ok: bool
    lower_min_slack: float
    upper_min_slack: float
    lower_witness: tuple | None
    upper_witness: tuple | None
    pairs_checked: int

    def to_json(self):
        return json.dumps(asdict(self))


def check_discretization_bounds(domain_distance, graph, vertex_locations, eps, batch=256):
    """Check ``(eps/4) d_G - 10 <= d_M <= 4 eps d_G`` on every vertex pair.

    ``domain_distance`` is either a :class:`FiniteMetricSpace` on the sample
    points or a callable ``f(sources) -> array`` returning rows of sample
    distances for the given sample indices (rows are computed lazily in
    batches, so large domains never materialize the full matrix).
    Slack is reported as the smallest margin; negative means violated.
    """
    locs = np.asarray(vertex_locations, dtype=np.int64)
    n = graph.n_vertices
    if locs.shape != (n,):
        raise InputError("vertex_locations must have one entry per vertex")
    if isinstance(domain_distance, FiniteMetricSpace):
        rows_of = lambda src: domain_distance.d[src]  # noqa: E731
    else:
        rows_of = domain_distance
    lower_min, upper_min = np.inf, np.inf
    lower_w = upper_w = None
    pairs = 0
    for start in range(0, n, batch):
        verts = np.arange(start, min(start + batch, n))
        dg = hop_distance_matrix(graph, sources=verts).astype(float)
        dg[dg == UNREACHABLE] = np.inf
        dm = np.asarray(rows_of(locs[verts]))[:, locs]
        # only pairs (i, j) with i < j
        mask = verts[:, None] < np.arange(n)[None, :]
        if not mask.any():
            continue
        pairs += int(mask.sum())
        with np.errstate(invalid="ignore"):
            low = dm - (eps / 4.0 * dg - 10.0)
            up = 4.0 * eps * dg - dm
        low = np.where(mask, low, np.inf)
        up = np.where(mask, up, np.inf)
        k = np.unravel_index(np.argmin(low), low.shape)
        if low[k] < lower_min:
            lower_min = float(low[k])
            lower_w = (int(verts[k[0]]), int(k[1]))
        k = np.unravel_index(np.argmin(up), up.shape)
        if up[k] < upper_min:
            upper_min = float(up[k])
            upper_w = (int(verts[k[0]]), int(k[1]))
    lower_ok = not lower_min < -METRIC_TOL
    upper_ok = not upper_min < -METRIC_TOL
    return DiscretizationBoundsReport(
        holds=bool(lower_ok and upper_ok),
        lower_ok=bool(lower_ok),
        upper_ok=bool(upper_ok),
        lower_min_slack=lower_min,
        upper_min_slack=upper_min,
        lower_witness=lower_w,
        upper_witness=upper_w,
        pairs_checked=pairs,
    )
