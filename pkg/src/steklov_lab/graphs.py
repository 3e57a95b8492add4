"""Graphs with boundary, their energy forms, and the generator families."""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import GenerationError, InputError
from .numkit import eigh_dense

#: Sentinel stored in hop-distance matrices for pairs in different components.
UNREACHABLE = -1

RANDOM_REGULAR_MAX_ATTEMPTS = 10_000


@dataclass(frozen=True)
class BoundaryGraph:
    """Simple undirected graph with a distinguished boundary vertex set.

    Edges are stored as sorted pairs ``(i, j)`` with ``i < j`` in
    lexicographic order and the boundary as a sorted tuple, so two equal
    graphs always have equal fields.
    """

    n_vertices: int
    edges: tuple
    boundary: tuple

    def __post_init__(self):
        n = int(self.n_vertices)
        if n < 1:
            raise InputError("a graph needs at least one vertex")
        canon = set()
        for e in self.edges:
            i, j = (int(x) for x in e)
            if i == j:
                raise InputError(f"self-loop at vertex {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise InputError(f"edge {(i, j)} out of range for {n} vertices")
            key = (min(i, j), max(i, j))
            if key in canon:
                raise InputError(f"duplicate edge {key}")
            canon.add(key)
        bnd = sorted({int(b) for b in self.boundary})
        if not bnd:
            raise InputError("boundary must be non-empty")
        if bnd[0] < 0 or bnd[-1] >= n:
            raise InputError("boundary vertex out of range")
        if len(bnd) != len(tuple(self.boundary)):
            raise InputError("duplicate boundary vertex")
        object.__setattr__(self, "n_vertices", n)
        object.__setattr__(self, "edges", tuple(sorted(canon)))
        object.__setattr__(self, "boundary", tuple(bnd))

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def interior(self):
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[list(self.boundary)] = False
        return tuple(int(v) for v in np.nonzero(mask)[0])

    def edge_array(self):
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)

    def degrees(self):
        deg = np.zeros(self.n_vertices, dtype=np.int64)
        e = self.edge_array()
        np.add.at(deg, e[:, 0], 1)
        np.add.at(deg, e[:, 1], 1)
        return deg

    def adjacency(self):
        e = self.edge_array()
        n = self.n_vertices
        data = np.ones(2 * len(e))
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))

    def neighbors(self):
        nbrs = [[] for _ in range(self.n_vertices)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return [sorted(x) for x in nbrs]

    def with_boundary(self, boundary):
        return BoundaryGraph(self.n_vertices, self.edges, tuple(boundary))

    def to_json(self):
        return json.dumps(
            {
                "n": self.n_vertices,
                "edges": [list(e) for e in self.edges],
                "boundary": list(self.boundary),
            }
        )

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        try:
            return cls(int(data["n"]), tuple(tuple(e) for e in data["edges"]), tuple(data["boundary"]))
        except KeyError as exc:
            raise InputError(f"graph JSON is missing key {exc}") from exc


def load_graph(path):
    return BoundaryGraph.from_json(Path(path).read_text())


def save_graph(g, path):
    Path(path).write_text(g.to_json())


def laplacian(g):
    """Combinatorial Laplacian ``D - A`` as a CSR matrix."""
    a = g.adjacency()
    return (sparse.diags(np.asarray(a.sum(axis=1)).ravel()) - a).tocsr()


def _check_function(g, f):
    f = np.asarray(f, dtype=float)
    if f.shape != (g.n_vertices,):
        raise InputError(f"vertex function has shape {f.shape}, expected ({g.n_vertices},)")
    return f


def dirichlet_energy(g, f):
    """Sum of squared differences across all edges."""
    f = _check_function(g, f)
    e = g.edge_array()
    if len(e) == 0:
        return 0.0
    return float(np.sum((f[e[:, 0]] - f[e[:, 1]]) ** 2))


def boundary_energy(g, f):
    """Sum of squared differences across edges joining two boundary vertices."""
    f = _check_function(g, f)
    e = g.edge_array()
    if len(e) == 0:
        return 0.0
    on_b = np.zeros(g.n_vertices, dtype=bool)
    on_b[list(g.boundary)] = True
    keep = on_b[e[:, 0]] & on_b[e[:, 1]]
    e = e[keep]
    return float(np.sum((f[e[:, 0]] - f[e[:, 1]]) ** 2))


def hop_distance_matrix(g, sources=None):
    """Shortest-path hop counts; pairs in different components hold ``UNREACHABLE``.

    With ``sources`` only the corresponding rows are computed.
    """
    a = g.adjacency()
    d = csgraph.shortest_path(a, method="D", unweighted=True, indices=sources)
    out = np.full(d.shape, UNREACHABLE, dtype=np.int64)
    finite = np.isfinite(d)
    out[finite] = d[finite].astype(np.int64)
    return out


def connected_components(g):
    """Return ``(count, labels)``."""
    return csgraph.connected_components(g.adjacency(), directed=False)


def is_connected(g):
    return connected_components(g)[0] == 1


# --- generator families -------------------------------------------------


def path_graph(n, boundary=None):
    edges = tuple((i, i + 1) for i in range(n - 1))
    return BoundaryGraph(n, edges, tuple(range(n)) if boundary is None else tuple(boundary))


def cycle_graph(n, boundary=None):
    if n < 3:
        raise InputError("a cycle needs at least 3 vertices")
    edges = tuple((i, (i + 1) % n) for i in range(n))
    return BoundaryGraph(n, edges, tuple(range(n)) if boundary is None else tuple(boundary))


def star_graph(leaves, boundary=None):
    """Star with center 0 and leaves ``1..leaves``."""
    edges = tuple((0, i) for i in range(1, leaves + 1))
    bnd = tuple(range(1, leaves + 1)) if boundary is None else tuple(boundary)
    return BoundaryGraph(leaves + 1, edges, bnd)


def complete_graph(n, boundary=None):
    edges = tuple((i, j) for i in range(n) for j in range(i + 1, n))
    return BoundaryGraph(n, edges, tuple(range(n)) if boundary is None else tuple(boundary))


def lattice_graph(l):
    """The ``(l+1) x (l+1)`` grid; vertex ``(a, b)`` has index ``a * (l+1) + b``.

    Every vertex is a boundary vertex.
    """
    if l < 1:
        raise InputError("lattice size must be >= 1")
    k = l + 1
    edges = []
    for a in range(k):
        for b in range(k):
            v = a * k + b
            if a + 1 < k:
                edges.append((v, v + k))
            if b + 1 < k:
                edges.append((v, v + 1))
    return BoundaryGraph(k * k, tuple(edges), tuple(range(k * k)))


def random_regular_graph(n, d, seed):
    """Uniform-ish simple connected ``d``-regular graph via the pairing model.

    Whole pairings containing a loop or a multi-edge, and disconnected
    outcomes, are rejected and redrawn. All vertices are boundary vertices.
    """
    if d < 1 or n <= d:
        raise InputError(f"need n > d >= 1, got n={n}, d={d}")
    if (n * d) % 2:
        raise InputError("n * d must be even")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), d)
    for attempt in range(1, RANDOM_REGULAR_MAX_ATTEMPTS + 1):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        pairs.sort(axis=1)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        keys = pairs[:, 0] * n + pairs[:, 1]
        if np.unique(keys).size != keys.size:
            continue
        g = BoundaryGraph(n, tuple(map(tuple, pairs.tolist())), tuple(range(n)))
        if is_connected(g):
            return g
    raise GenerationError(
        f"no simple connected {d}-regular graph on {n} vertices after "
        f"{RANDOM_REGULAR_MAX_ATTEMPTS} attempts",
        attempts=RANDOM_REGULAR_MAX_ATTEMPTS,
    )


GRAPH_FAMILIES = {
    "lattice": lambda p: lattice_graph(p["l"]),
    "random_regular": lambda p: random_regular_graph(p["n"], p["d"], p["seed"]),
    "path": lambda p: path_graph(p["n"]),
    "cycle": lambda p: cycle_graph(p["n"]),
    "star": lambda p: star_graph(p["n"]),
}


def make_graph(family, **params):
    """Build a member of a named family (see :data:`GRAPH_FAMILIES`)."""
    try:
        builder = GRAPH_FAMILIES[family]
    except KeyError:
        raise InputError(f"unknown graph family {family!r}") from None
    return builder(params)


# --- spectra ------------------------------------------------------------


def laplacian_spectrum(g):
    w, _ = eigh_dense(laplacian(g).toarray())
    return w


def zero_multiplicity(values, scale):
    return int(np.sum(np.abs(values) <= 1e-9 * (1.0 + scale)))


def laplacian_lambda2(g):
    """Second-smallest Laplacian eigenvalue.

    A disconnected graph returns 0 and emits a warning carrying the
    multiplicity of the zero eigenvalue.
    """
    if g.n_vertices == 1:
        return 0.0
    w = laplacian_spectrum(g)
    mult = zero_multiplicity(w, g.degrees().max(initial=0))
    if mult > 1:
        warnings.warn(f"graph is disconnected: zero eigenvalue has multiplicity {mult}", stacklevel=2)
        return 0.0
    return float(max(w[1], 0.0))


def bfs_order(g, root=0):
    """Vertices in BFS order from ``root`` with ascending-neighbor tie-break."""
    nbrs = g.neighbors()
    seen = [False] * g.n_vertices
    seen[root] = True
    order = []
    queue = deque([root])
    while queue:
        v = queue.popleft()
        order.append(v)
        for w in nbrs[v]:
            if not seen[w]:
                seen[w] = True
                queue.append(w)
    return order
