"""Epsilon-discretizations of sampled surfaces with a product collar.

A :class:`SampledDomain` is a finite sample of a surface ``M`` whose boundary
``Sigma`` has a collar ``Sigma x [0, depth]``. Distances on ``M`` come from
shortest paths in a background graph with Euclidean edge lengths, and
distances on ``Sigma`` from arclength along the boundary sample chains.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import DensityError, InputError, StructuralError
from .graphs import BoundaryGraph
from .mesh import node_adjacency

STRICT_MARGIN = 1e-12
#: Dijkstra rows computed per call when many sources are needed.
DIJKSTRA_BATCH = 64


@dataclass(frozen=True)
class DiscretizationParams:
    eps: float
    r0: float = 1.05
    kappa: float = 0.0
    n: int = 2

    def __post_init__(self):
        if not self.eps > 0:
            raise InputError("eps must be positive")
        if not self.eps < self.r0 / 4:
            raise InputError(f"eps = {self.eps} violates eps < r0/4 = {self.r0 / 4}")


class SampledDomain:
    """Sample points of a collared surface with geodesic and boundary oracles.

    ``chains`` lists each boundary component as ``(nodes, positions, length)``
    with arclength ``positions`` along the closed curve. ``columns`` maps each
    boundary node to the collar column above it: node ids and collar
    coordinates in increasing order.
    """

    def __init__(self, coords, chart, piece, collar_t, background, chains, columns, h_bg):
        self.coords = np.asarray(coords, dtype=float).reshape(-1, 2)
        n = self.coords.shape[0]
        self.chart = np.asarray(chart, dtype=np.int64)
        self.piece = np.asarray(piece, dtype=np.int64)
        self.collar_t = np.asarray(collar_t, dtype=float)
        self.is_boundary = self.collar_t == 0.0
        self.background = sparse.csr_matrix(background)
        self.chains = [(np.asarray(a, dtype=np.int64), np.asarray(s, dtype=float), float(length)) for a, s, length in chains]
        self.columns = {int(k): (np.asarray(v[0], dtype=np.int64), np.asarray(v[1], dtype=float)) for k, v in columns.items()}
        self.h_bg = float(h_bg)
        if self.background.shape != (n, n):
            raise InputError("background graph size does not match the point table")
        if self.background.nnz and self.background.data.min() <= 0:
            raise InputError("background edge lengths must be positive")
        ncomp, _ = csgraph.connected_components(self.background, directed=False)
        if ncomp != 1:
            raise StructuralError(f"background graph has {ncomp} components")
        on_chain = np.zeros(n, dtype=bool)
        for nodes, _, _ in self.chains:
            on_chain[nodes] = True
        if not np.array_equal(on_chain, self.is_boundary):
            raise InputError("boundary chains must list exactly the points with collar_t = 0")
        self._chain_of = np.full(n, -1, dtype=np.int64)
        self._pos_in_chain = np.zeros(n, dtype=np.int64)
        for ci, (nodes, _, _) in enumerate(self.chains):
            self._chain_of[nodes] = ci
            self._pos_in_chain[nodes] = np.arange(nodes.size)

    @property
    def n_points(self):
        return self.coords.shape[0]

    @classmethod
    def from_mesh(cls, mesh):
        """Domain on the nodes of a collared mesh, with the 8-neighbour stencil."""
        grids = mesh.meta.get("collar_grids")
        if grids is None:
            raise InputError("mesh has no collar; call attach_collar first")
        layers = mesh.meta["collar_layers"]
        chains, columns = [], {}
        for grid, s in zip(grids, mesh.meta["collar_arclengths"]):
            outer = grid[layers]
            chains.append((outer, s[:-1], s[-1]))
            for i in range(grid.shape[1]):
                col = grid[::-1, i]
                columns[int(outer[i])] = (col, mesh.node_collar_t[col])
        adj = node_adjacency(mesh, with_diagonals=True)
        h = float(np.min(mesh.boundary_lengths))
        return cls(mesh.node_coords, mesh.node_chart, mesh.node_piece, mesh.node_collar_t, adj, chains, columns, h)

    # --- distances --------------------------------------------------------

    def distance_rows(self, sources, limit=np.inf):
        """Geodesic distances from each source to every sample point."""
        src = np.atleast_1d(np.asarray(sources, dtype=np.int64))
        out = np.empty((src.size, self.n_points))
        for start in range(0, src.size, DIJKSTRA_BATCH):
            block = src[start : start + DIJKSTRA_BATCH]
            out[start : start + block.size] = csgraph.dijkstra(
                self.background, directed=False, indices=block, limit=limit
            )
        return out

    def geodesic_distance(self, i, j):
        return float(self.distance_rows([i])[0, j])

    def boundary_distance_from(self, i):
        """Arclength distance on ``Sigma`` from boundary point ``i`` to its chain."""
        ci = self._chain_of[i]
        if ci < 0:
            raise InputError(f"point {i} is not on the boundary")
        nodes, pos, length = self.chains[ci]
        d = np.abs(pos - pos[self._pos_in_chain[i]])
        return nodes, np.minimum(d, length - d)

    def partner(self, i, depth):
        """Collar point above boundary point ``i`` at collar coordinate ``depth``."""
        col, t = self.columns[int(i)]
        if depth > t[-1] + 1e-12:
            raise StructuralError(f"collar depth {t[-1]} is shallower than {depth}")
        k = int(np.argmin(np.abs(t - depth)))
        return int(col[k]), float(t[k] - depth)

    # --- text format ------------------------------------------------------

    def to_text(self):
        f = "{:.17g}".format
        buf = io.StringIO()
        up = sparse.triu(self.background, k=1).tocoo()
        order = np.lexsort((up.col, up.row))
        buf.write(f"SDOM {self.n_points} {order.size} {len(self.chains)} {len(self.columns)} {f(self.h_bg)}\n")
        for (x, y), ch, pc, t in zip(self.coords, self.chart, self.piece, self.collar_t):
            buf.write(f"P {f(x)} {f(y)} {ch} {pc} {f(t)}\n")
        for k in order:
            buf.write(f"E {up.row[k]} {up.col[k]} {f(up.data[k])}\n")
        for nodes, pos, length in self.chains:
            body = " ".join(f"{a} {f(s)}" for a, s in zip(nodes, pos))
            buf.write(f"C {nodes.size} {f(length)} {body}\n")
        for key in sorted(self.columns):
            col, t = self.columns[key]
            body = " ".join(f"{a} {f(s)}" for a, s in zip(col, t))
            buf.write(f"K {key} {col.size} {body}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text):
        lines = text.splitlines()
        head = lines[0].split()
        if head[0] != "SDOM":
            raise InputError("not a sampled-domain file")
        n, ne, nc, nk = (int(v) for v in head[1:5])
        h = float(head[5])
        rows = [ln.split() for ln in lines[1:]]
        pts = rows[:n]
        edges = rows[n : n + ne]
        chain_rows = rows[n + ne : n + ne + nc]
        col_rows = rows[n + ne + nc : n + ne + nc + nk]
        coords = [[float(r[1]), float(r[2])] for r in pts]
        i = np.array([int(r[1]) for r in edges], dtype=np.int64)
        j = np.array([int(r[2]) for r in edges], dtype=np.int64)
        w = np.array([float(r[3]) for r in edges])
        bg = sparse.csr_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
        chains = []
        for r in chain_rows:
            k = int(r[1])
            vals = r[3 : 3 + 2 * k]
            chains.append(([int(v) for v in vals[0::2]], [float(v) for v in vals[1::2]], float(r[2])))
        columns = {}
        for r in col_rows:
            k = int(r[2])
            vals = r[3 : 3 + 2 * k]
            columns[int(r[1])] = ([int(v) for v in vals[0::2]], [float(v) for v in vals[1::2]])
        return cls(
            coords,
            [int(r[3]) for r in pts],
            [int(r[4]) for r in pts],
            [float(r[5]) for r in pts],
            bg,
            chains,
            columns,
            h,
        )


def maximal_separated_set(n_candidates, eps, distance_from, seeds=()):
    """Greedy maximal ``eps``-separated subset of candidates ``0..n-1``.

    ``distance_from(i)`` returns the distances from candidate ``i`` to every
    candidate. Seeds are taken first; the remaining candidates are scanned in
    index order and kept when no kept point lies strictly closer than ``eps``.
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    covered = np.zeros(n_candidates, dtype=bool)
    chosen, taken = [], set()

    def take(i):
        chosen.append(int(i))
        taken.add(int(i))
        covered[:] |= np.asarray(distance_from(i)) < eps

    for i in seeds:
        if int(i) not in taken:
            take(i)
    for i in range(n_candidates):
        if not covered[i] and i not in taken:
            take(i)
    return chosen


def separated_points_on_line(values, eps):
    x = np.asarray(values, dtype=float)
    idx = maximal_separated_set(x.size, eps, lambda i: np.abs(x - x[i]))
    return x[idx]


@dataclass
class Discretization:
    graph: BoundaryGraph
    locations: np.ndarray
    partners: np.ndarray
    eps: float
    report: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.graph, self.locations))

    @property
    def n_boundary(self):
        return len(self.graph.boundary)


def _boundary_net(domain, eps):
    chosen = []
    for nodes, pos, length in domain.chains:
        def dist(i, pos=pos, length=length):
            d = np.abs(pos - pos[i])
            return np.minimum(d, length - d)

        chosen += [int(nodes[i]) for i in maximal_separated_set(nodes.size, eps, dist)]
    return chosen


def build_discretization(domain, params, seed_points=None):
    """Graph with boundary from a collared sample, following the eps-net recipe.

    Boundary vertices form a maximal ``eps``-separated set of each boundary
    curve in its own arclength; each gets a partner at collar depth ``4 eps``.
    Interior vertices form a maximal ``eps``-separated set of the points at
    collar depth ``>= 4 eps`` containing the partners (and ``seed_points``).
    Vertices closer than ``3 eps`` are adjacent, and each boundary vertex is
    joined to its partner.
    """
    eps = params.eps
    depth = 4 * eps
    v_sigma = _boundary_net(domain, eps)
    partner_nodes, partner_err = [], 0.0
    for v in v_sigma:
        p, err = domain.partner(v, depth)
        partner_nodes.append(p)
        partner_err = max(partner_err, abs(err))
    if partner_err > 0.5 * domain.h_bg + 1e-12:
        raise StructuralError(f"no sample point within h/2 of collar depth {depth}")

    region = np.nonzero(domain.collar_t >= depth - 1e-12)[0]
    where = np.full(domain.n_points, -1, dtype=np.int64)
    where[region] = np.arange(region.size)
    seeds = list(dict.fromkeys(partner_nodes + [int(s) for s in (seed_points or [])]))
    if any(where[s] < 0 for s in seeds):
        raise InputError("seed points must lie at collar depth >= 4 eps")

    def dist(i):
        return domain.distance_rows([region[i]], limit=eps)[0, region]

    chosen = maximal_separated_set(region.size, eps, dist, seeds=[int(where[s]) for s in seeds])
    v_inner = [int(region[i]) for i in chosen]

    locations = np.array(v_sigma + v_inner, dtype=np.int64)
    nb = len(v_sigma)
    vertex_of = {int(p): k for k, p in enumerate(locations)}
    edges = set()
    rows = domain.distance_rows(locations, limit=3 * eps)
    near = rows[:, locations] < 3 * eps - STRICT_MARGIN
    a_idx, b_idx = np.nonzero(np.triu(near, k=1))
    edges.update(zip(a_idx.tolist(), b_idx.tolist()))
    partners = np.array([vertex_of[p] for p in partner_nodes], dtype=np.int64)
    for v, p in enumerate(partners):
        edges.add((min(v, int(p)), max(v, int(p))))
    graph = BoundaryGraph(locations.size, tuple(edges), tuple(range(nb)))

    inner_d = rows[nb:, locations[nb:]]
    off = inner_d + np.diag(np.full(inner_d.shape[0], np.inf))
    grown = off[len(seeds) :, :] if len(seeds) < inner_d.shape[0] else np.full((0, 0), np.inf)
    cover = csgraph.dijkstra(domain.background, directed=False, indices=locations, min_only=True)
    report = {
        "eps": eps,
        "n_boundary": nb,
        "n_interior": len(v_inner),
        "n_edges": graph.n_edges,
        "max_degree": int(graph.degrees().max(initial=0)),
        "min_interior_separation": float(off.min(initial=np.inf)),
        "min_added_separation": float(grown.min(initial=np.inf)),
        "covering_radius": float(cover[region].max(initial=0.0)),
        "partner_depth_error": partner_err,
    }
    return Discretization(graph, locations, partners, eps, report)


def discretize_function(domain, disc, values, params=None):
    """Average a sample function over ``3 eps`` balls around each vertex.

    Boundary vertices use arclength balls on their boundary curve, interior
    vertices geodesic balls in ``M``.
    """
    eps = disc.eps if params is None else params.eps
    f = np.asarray(values, dtype=float)
    if f.shape[0] != domain.n_points:
        raise InputError("sample function must be defined on every sample point")
    radius = 3 * eps
    out = np.empty((disc.graph.n_vertices,) + f.shape[1:])
    nb = disc.n_boundary
    for v in range(nb):
        nodes, d = domain.boundary_distance_from(int(disc.locations[v]))
        ball = nodes[d < radius]
        if ball.size == 0:
            raise DensityError(f"empty boundary ball at vertex {v}")
        out[v] = f[ball].mean(axis=0)
    inner = disc.locations[nb:]
    for start in range(0, inner.size, DIJKSTRA_BATCH):
        block = inner[start : start + DIJKSTRA_BATCH]
        rows = domain.distance_rows(block, limit=radius)
        for k in range(block.size):
            ball = np.nonzero(rows[k] < radius)[0]
            if ball.size == 0:
                raise DensityError(f"empty ball at vertex {nb + start + k}")
            out[nb + start + k] = f[ball].mean(axis=0)
    return out
