"""Triangle meshes with node identifications, boundary extraction and topology.

Triangles always come in pairs ``(a, b, c), (a, c, d)`` covering one
quadrilateral cell; the pairing is used to recover the second diagonal of
each cell when a mesh doubles as a geodesic background grid.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import InputError, StructuralError

MIN_TRIANGLE_AREA = 1e-12


@dataclass
class FemMesh:
    """Conforming triangle mesh of a surface built from flat charts.

    Coordinates are stored per triangle (``tri_coords``) because a node
    shared across a gluing has different coordinates in different charts.
    ``node_coords``/``node_chart`` hold one representative placement per node;
    ``identifications`` lists every ``(node, chart, x, y)`` occurrence.
    """

    node_coords: np.ndarray
    node_chart: np.ndarray
    triangles: np.ndarray
    tri_coords: np.ndarray
    tri_chart: np.ndarray
    identifications: np.ndarray
    node_piece: np.ndarray
    node_collar_t: np.ndarray
    meta: dict = field(default_factory=dict)
    _topology: dict | None = field(default=None, repr=False)

    @property
    def n_nodes(self):
        return self.node_coords.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def triangle_areas(self):
        p = self.tri_coords
        u = p[:, 1] - p[:, 0]
        v = p[:, 2] - p[:, 0]
        return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])

    def area(self):
        return float(self.triangle_areas().sum())

    # --- topology ---------------------------------------------------------

    def topology(self):
        if self._topology is None:
            self._topology = _analyze(self)
        return self._topology

    @property
    def boundary_edges(self):
        """Directed boundary edges ``(a, b)``; the surface lies to their left."""
        return self.topology()["boundary_edges"]

    @property
    def boundary_lengths(self):
        return self.topology()["boundary_lengths"]

    @property
    def boundary_tags(self):
        """Boundary component index of each boundary edge."""
        return self.topology()["boundary_tags"]

    def boundary_nodes(self):
        return np.unique(self.boundary_edges.ravel())

    def boundary_cycles(self):
        """Boundary components as node cycles, with edge lengths along each."""
        return self.topology()["cycles"]

    def edges(self):
        return self.topology()["edges"]

    def cell_diagonals(self):
        """Second diagonal ``(b, d)`` of every cell and its chart length."""
        t = self.triangles
        c = self.tri_coords
        first = t[0::2]
        second = t[1::2]
        if not (np.array_equal(first[:, 0], second[:, 0]) and np.array_equal(first[:, 2], second[:, 1])):
            raise StructuralError("triangles are not stored as cell pairs")
        b, d = first[:, 1], second[:, 2]
        lengths = np.linalg.norm(c[0::2, 1] - c[1::2, 2], axis=1)
        return np.column_stack([b, d]), lengths

    def copy_with(self, **changes):
        changes.setdefault("_topology", None)
        return replace(self, **changes)


def _analyze(mesh):
    tri = mesh.triangles
    n = mesh.n_nodes
    if tri.size and (tri.min() < 0 or tri.max() >= n):
        raise StructuralError("triangle references a missing node")
    bad = (tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])
    if bad.any():
        raise StructuralError(f"triangle {int(np.argmax(bad))} has repeated nodes after identification")
    areas = mesh.triangle_areas()
    if np.any(areas < MIN_TRIANGLE_AREA):
        k = int(np.argmin(areas))
        raise StructuralError(f"triangle {k} is degenerate or negatively oriented (area {areas[k]:.3e})")
    directed = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    seg_len = np.concatenate(
        [
            np.linalg.norm(mesh.tri_coords[:, 1] - mesh.tri_coords[:, 0], axis=1),
            np.linalg.norm(mesh.tri_coords[:, 2] - mesh.tri_coords[:, 1], axis=1),
            np.linalg.norm(mesh.tri_coords[:, 0] - mesh.tri_coords[:, 2], axis=1),
        ]
    )
    owner = np.concatenate([np.arange(len(tri))] * 3)
    key = directed[:, 0].astype(np.int64) * n + directed[:, 1]
    uniq, counts = np.unique(key, return_counts=True)
    if np.any(counts > 1):
        dup = uniq[counts > 1][0]
        a, b = divmod(int(dup), n)
        tris = owner[key == dup]
        raise StructuralError(
            f"inconsistent orientation: edge ({a}, {b}) is used twice in the same direction "
            f"by triangles {tris.tolist()} (charts {mesh.tri_chart[tris].tolist()})"
        )
    rev = directed[:, 1].astype(np.int64) * n + directed[:, 0]
    is_bnd = ~np.isin(rev, key)
    bedges = directed[is_bnd]
    blen = seg_len[is_bnd]
    lo = np.minimum(directed[:, 0], directed[:, 1])
    hi = np.maximum(directed[:, 0], directed[:, 1])
    und = np.unique(lo.astype(np.int64) * n + hi)
    edges = np.column_stack(divmod(und, n))

    # walk boundary cycles
    order = np.argsort(bedges[:, 0], kind="stable")
    starts = bedges[order, 0]
    if np.any(np.diff(starts) == 0):
        v = int(starts[np.nonzero(np.diff(starts) == 0)[0][0]])
        raise StructuralError(f"non-manifold boundary vertex {v}")
    next_edge = {int(bedges[i, 0]): int(i) for i in range(len(bedges))}
    tags = np.full(len(bedges), -1, dtype=np.int64)
    cycles = []
    for i in range(len(bedges)):
        if tags[i] >= 0:
            continue
        comp = len(cycles)
        nodes, lens = [], []
        j = i
        while tags[j] < 0:
            tags[j] = comp
            nodes.append(int(bedges[j, 0]))
            lens.append(float(blen[j]))
            nxt = next_edge.get(int(bedges[j, 1]))
            if nxt is None:
                raise StructuralError(f"boundary walk broken at vertex {int(bedges[j, 1])}")
            j = nxt
        if j != i:
            raise StructuralError(f"boundary walk from edge {i} does not close")
        cycles.append((np.array(nodes), np.array(lens)))
    used = np.zeros(n, dtype=bool)
    used[tri.ravel()] = True
    return {
        "boundary_edges": bedges,
        "boundary_lengths": blen,
        "boundary_tags": tags,
        "cycles": cycles,
        "edges": edges,
        "n_used_nodes": int(used.sum()),
    }


def boundary_components(mesh):
    """Number of boundary components and the length of each."""
    cycles = mesh.boundary_cycles()
    return len(cycles), [float(lens.sum()) for _, lens in cycles]


def euler_genus(mesh):
    """Return ``(chi, genus, b)`` for an orientable mesh."""
    top = mesh.topology()
    chi = top["n_used_nodes"] - len(top["edges"]) + mesh.n_triangles
    b = len(top["cycles"])
    twice = 2 - chi - b
    if twice % 2 or twice < 0:
        raise StructuralError(f"non-integer genus from chi={chi}, b={b}")
    return int(chi), twice // 2, b


def attach_collar(mesh, depth=1.0, layers=8):
    """Glue a flat product cylinder ``Sigma x [0, depth]`` along the boundary.

    Each boundary cycle of length ``L`` receives an ``L x depth`` strip whose
    columns sit over the boundary nodes. The new boundary is the far end of
    the strips; collar nodes record their distance ``t`` to it in
    ``node_collar_t`` (core nodes keep ``inf``).
    """
    if layers < 1 or depth <= 0:
        raise InputError("collar needs depth > 0 and at least one layer")
    cycles = mesh.boundary_cycles()
    if not cycles:
        raise InputError("mesh has no boundary to attach a collar to")
    n0 = mesh.n_nodes
    new_coords, new_chart, new_piece, new_t = [], [], [], []
    tris, tcoords, tchart = [], [], []
    idents = []
    next_id = n0
    chart_base = int(max(mesh.tri_chart.max(initial=-1), mesh.node_chart.max(initial=-1))) + 1
    dt = depth / layers
    grids, arclengths = [], []
    for ci, (nodes, lens) in enumerate(cycles):
        chart = chart_base + ci
        k = len(nodes)
        s = np.concatenate([[0.0], np.cumsum(lens)])
        # grid[j][i]: node at column i (over boundary node nodes[i]), row j (distance j*dt outward)
        grid = np.empty((layers + 1, k), dtype=np.int64)
        grid[0] = nodes
        for j in range(1, layers + 1):
            grid[j] = np.arange(next_id, next_id + k)
            next_id += k
            new_coords.append(np.column_stack([s[:-1], np.full(k, -j * dt)]))
            new_chart.append(np.full(k, chart))
            new_piece.append(mesh.node_piece[nodes])
            new_t.append(np.full(k, (layers - j) * depth / layers))
        grids.append(grid)
        arclengths.append(s)
        for i in range(k):
            i1 = (i + 1) % k
            for j in range(layers):
                p0, p1 = grid[j + 1, i], grid[j + 1, i1]
                p2, p3 = grid[j, i1], grid[j, i]
                c0 = (s[i], -(j + 1) * dt)
                c1 = (s[i + 1], -(j + 1) * dt)
                c2 = (s[i + 1], -j * dt)
                c3 = (s[i], -j * dt)
                tris += [(p0, p1, p2), (p0, p2, p3)]
                tcoords += [(c0, c1, c2), (c0, c2, c3)]
                tchart += [chart, chart]
        for i in range(k):
            idents.append((int(nodes[i]), chart, float(s[i]), 0.0))
        for j in range(1, layers + 1):
            for i in range(k):
                idents.append((int(grid[j, i]), chart, float(s[i]), -j * dt))
    core_t = mesh.node_collar_t.copy()
    for nodes, _ in cycles:
        core_t[nodes] = depth
    meta = dict(mesh.meta)
    # grid[j, i]: column i over the old boundary, row j at collar coordinate depth - j * dt
    meta.update(collar_depth=depth, collar_layers=layers, collar_grids=grids, collar_arclengths=arclengths)
    return FemMesh(
        node_coords=np.vstack([mesh.node_coords] + new_coords),
        node_chart=np.concatenate([mesh.node_chart] + new_chart),
        triangles=np.vstack([mesh.triangles, np.array(tris, dtype=np.int64)]),
        tri_coords=np.concatenate([mesh.tri_coords, np.array(tcoords, dtype=float)]),
        tri_chart=np.concatenate([mesh.tri_chart, np.array(tchart, dtype=np.int64)]),
        identifications=np.vstack([mesh.identifications, np.array(idents, dtype=float)]),
        node_piece=np.concatenate([mesh.node_piece] + new_piece),
        node_collar_t=np.concatenate([core_t] + new_t),
        meta=meta,
    )


def stretch(mesh, factor, axis=0):
    """Scale every chart coordinate along ``axis`` by ``factor``."""
    tc = mesh.tri_coords.copy()
    tc[..., axis] *= factor
    nc = mesh.node_coords.copy()
    nc[:, axis] *= factor
    ids = mesh.identifications.copy()
    ids[:, 2 + axis] *= factor
    return mesh.copy_with(tri_coords=tc, node_coords=nc, identifications=ids)


def dilate(mesh, factor):
    out = stretch(mesh, factor, 0)
    return stretch(out, factor, 1)


# --- text format -----------------------------------------------------------

_FMT = "{:.17g}"


def write_mesh(mesh, fh):
    """Write the OFF-like format: header, nodes, triangles, identifications, boundary.

    Every float is printed with 17 significant digits so a read-back is exact.
    """
    f = _FMT.format
    bedges = mesh.boundary_edges
    tags = mesh.boundary_tags
    fh.write("SOFF\n")
    fh.write(f"{mesh.n_nodes} {mesh.n_triangles} {len(mesh.identifications)} {len(bedges)}\n")
    for (x, y), ch, pc, t in zip(mesh.node_coords, mesh.node_chart, mesh.node_piece, mesh.node_collar_t):
        fh.write(f"{f(x)} {f(y)} {int(ch)} {int(pc)} {f(t)}\n")
    for tri, crd, ch in zip(mesh.triangles, mesh.tri_coords, mesh.tri_chart):
        coords = " ".join(f(v) for v in crd.ravel())
        fh.write(f"3 {tri[0]} {tri[1]} {tri[2]} {coords} {int(ch)}\n")
    for node, ch, x, y in mesh.identifications:
        fh.write(f"I {int(node)} {int(ch)} {f(x)} {f(y)}\n")
    for (a, b), tag in zip(bedges, tags):
        fh.write(f"B {a} {b} {tag}\n")


def mesh_to_text(mesh):
    buf = io.StringIO()
    write_mesh(mesh, buf)
    return buf.getvalue()


def read_mesh(fh):
    lines = iter(fh.read().splitlines())
    if next(lines).strip() != "SOFF":
        raise InputError("not a SOFF mesh file")
    nn, nt, ni, nb = (int(x) for x in next(lines).split())
    nodes = [next(lines).split() for _ in range(nn)]
    tris = [next(lines).split() for _ in range(nt)]
    ids = [next(lines).split() for _ in range(ni)]
    bnd = [next(lines).split() for _ in range(nb)]
    mesh = FemMesh(
        node_coords=np.array([[float(r[0]), float(r[1])] for r in nodes]).reshape(-1, 2),
        node_chart=np.array([int(r[2]) for r in nodes], dtype=np.int64),
        triangles=np.array([[int(r[1]), int(r[2]), int(r[3])] for r in tris], dtype=np.int64).reshape(-1, 3),
        tri_coords=np.array([[float(v) for v in r[4:10]] for r in tris]).reshape(-1, 3, 2),
        tri_chart=np.array([int(r[10]) for r in tris], dtype=np.int64),
        identifications=np.array([[float(v) for v in r[1:]] for r in ids]).reshape(-1, 4),
        node_piece=np.array([int(r[3]) for r in nodes], dtype=np.int64),
        node_collar_t=np.array([float(r[4]) for r in nodes]),
    )
    stored = np.array([[int(r[1]), int(r[2])] for r in bnd], dtype=np.int64).reshape(-1, 2)
    if not np.array_equal(stored, mesh.boundary_edges):
        raise InputError("boundary edge table does not match the triangles")
    return mesh


def node_adjacency(mesh, with_diagonals=False):
    """Symmetric sparse matrix of chart edge lengths between mesh nodes."""
    mesh.topology()  # validates orientation and manifoldness first
    t = mesh.triangles
    c = mesh.tri_coords
    # edge lengths from the owning triangles (identical across gluings)
    pairs = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    lens = np.concatenate(
        [
            np.linalg.norm(c[:, 1] - c[:, 0], axis=1),
            np.linalg.norm(c[:, 2] - c[:, 1], axis=1),
            np.linalg.norm(c[:, 0] - c[:, 2], axis=1),
        ]
    )
    if with_diagonals:
        d, dl = mesh.cell_diagonals()
        pairs = np.vstack([pairs, d])
        lens = np.concatenate([lens, dl])
    n = mesh.n_nodes
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    key = lo.astype(np.int64) * n + hi
    _, first = np.unique(key, return_index=True)
    lo, hi, lens = lo[first], hi[first], lens[first]
    return sparse.csr_matrix(
        (np.concatenate([lens, lens]), (np.concatenate([lo, hi]), np.concatenate([hi, lo]))),
        shape=(n, n),
    )


def mesh_components(mesh):
    adj = node_adjacency(mesh)
    return csgraph.connected_components(adj, directed=False)
