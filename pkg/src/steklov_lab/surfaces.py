"""Surfaces glued from unit squares: puzzle domains, flat crosses and carved crosses.

A :class:`PieceComplex` is a list of unit squares, each placed in a flat
chart, together with side-to-side gluings. Squares in the same chart that
share a side are glued automatically. Every gluing reverses the side
parameter, which keeps the glued surface orientable when all squares are
counterclockwise in their charts.

Square sides are numbered counterclockwise: 0 bottom, 1 right, 2 top, 3 left.

The doubled cross used for the graph surfaces consists of a top sheet and a
bottom sheet, each a plus shape of five squares, with the lateral sides of
the four arms glued top to bottom. Each arm end is then a circle of length 2,
which serves as a port. Removing the top centre square gives the flat cross
(a planar four-holed domain with one extra square hole); carving a strip
along the spanning-tree ports of the top sheet gives the carved pieces.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import InputError, StructuralError
from .graphs import BoundaryGraph, is_connected
from .mesh import FemMesh

# Port directions; index == port label.
DIRECTIONS = ("E", "N", "W", "S")
_STEP = {"E": (1, 0), "N": (0, 1), "W": (-1, 0), "S": (0, -1)}
_OUTER_SIDE = {"E": 1, "N": 2, "W": 3, "S": 0}
# reflection x -> -x swaps left and right sides
_MIRROR_SIDE = {0: 0, 1: 3, 2: 2, 3: 1}
_MIRROR_DIR = {"E": "W", "W": "E", "N": "N", "S": "S"}
_OPPOSITE = {"E": "W", "W": "E", "N": "S", "S": "N"}
_LATERAL = {"E": (0, 2), "W": (0, 2), "N": (1, 3), "S": (1, 3)}


@dataclass(frozen=True)
class Square:
    piece: int
    chart: int
    x: int
    y: int
    # directions of slit strips running from the square centre to a side
    slits: frozenset = frozenset()


@dataclass
class Piece:
    kind: str
    # port label -> list of (square, side) segments forming that port
    ports: dict = field(default_factory=dict)


@dataclass
class PieceComplex:
    kind: str
    squares: list
    gluings: list
    pieces: list
    port_gluings: list = field(default_factory=list)

    @property
    def n_pieces(self):
        return len(self.pieces)

    def piece_kinds(self):
        out = {}
        for p in self.pieces:
            out[p.kind] = out.get(p.kind, 0) + 1
        return out

    def area(self, m=None):
        """Area of the squares; with ``m`` the slit cells are subtracted."""
        if m is None:
            return float(len(self.squares))
        return float(sum(_cell_mask(sq.slits, m).sum() for sq in self.squares)) / (m * m)


class _Builder:
    def __init__(self):
        self.squares = []
        self.gluings = []
        self.where = {}

    def add(self, piece, chart, x, y, slits=()):
        key = (chart, x, y)
        if key in self.where:
            raise StructuralError(f"two squares at {key}")
        self.where[key] = len(self.squares)
        self.squares.append(Square(piece, chart, x, y, frozenset(slits)))
        return self.where[key]

    def glue(self, a, side_a, b, side_b):
        self.gluings.append((a, side_a, b, side_b))

    def glue_chart_neighbours(self):
        for (chart, x, y), s in sorted(self.where.items(), key=lambda kv: kv[1]):
            right = self.where.get((chart, x + 1, y))
            if right is not None:
                self.glue(s, 1, right, 3)
            up = self.where.get((chart, x, y + 1))
            if up is not None:
                self.glue(s, 2, up, 0)


def _check_gluings(c):
    used = set()
    for a, sa, b, sb in c.gluings:
        for key in ((a, sa), (b, sb)):
            if key in used:
                raise StructuralError(f"side {key} is glued twice")
            used.add(key)


# --- builders ---------------------------------------------------------------


def build_lattice_domain(l):
    """Planar puzzle domain: one plus-shaped piece per vertex of the ``(l+1)``-grid.

    Pieces sit on a spacing-3 grid and keep only the arms pointing to lattice
    neighbours, so a vertex of degree ``k`` gets the piece ``D_k``.
    """
    if l < 1:
        raise InputError("lattice size must be >= 1")
    k = l + 1
    bld = _Builder()
    pieces = []
    for a in range(k):
        for b in range(k):
            pid = len(pieces)
            arms = [d for d, ok in (("E", a < l), ("N", b < l), ("W", a > 0), ("S", b > 0)) if ok]
            bld.add(pid, 0, 3 * a, 3 * b)
            piece = Piece(kind=f"D{len(arms)}")
            for d in arms:
                dx, dy = _STEP[d]
                s = bld.add(pid, 0, 3 * a + dx, 3 * b + dy)
                piece.ports[DIRECTIONS.index(d)] = [(s, _OUTER_SIDE[d])]
            pieces.append(piece)
    bld.glue_chart_neighbours()
    port_gluings = []
    for a in range(k):
        for b in range(k):
            u = a * k + b
            if a < l:
                port_gluings.append(((u, 0), (u + k, 2)))
            if b < l:
                port_gluings.append(((u, 1), (u + 1, 3)))
    c = PieceComplex("lattice", bld.squares, bld.gluings, pieces, port_gluings)
    _check_gluings(c)
    return c


def _check_four_regular(g):
    if not isinstance(g, BoundaryGraph):
        raise InputError("expected a BoundaryGraph")
    deg = g.degrees()
    if np.any(deg != 4):
        bad = int(np.argmax(deg != 4))
        raise InputError(f"graph is not 4-regular (vertex {bad} has degree {deg[bad]})")
    if not is_connected(g):
        raise InputError("graph must be connected")


def port_assignment(g):
    """Port label at ``u`` for each edge: index of the neighbour in sorted order."""
    nbrs = g.neighbors()
    return {(u, v): nbrs[u].index(v) for u in range(g.n_vertices) for v in nbrs[u]}


def _doubled_cross(bld, pid, with_centre=True, centre_slits=(), arm_slits=()):
    top, bottom = 2 * pid, 2 * pid + 1
    piece = Piece(kind="cross")
    if with_centre:
        bld.add(pid, top, 0, 0, centre_slits)
    bld.add(pid, bottom, 0, 0)
    for d in DIRECTIONS:
        dx, dy = _STEP[d]
        slit = (d, _OPPOSITE[d]) if d in arm_slits else ()
        t = bld.add(pid, top, dx, dy, slit)
        b = bld.add(pid, bottom, -dx, dy)
        for side in _LATERAL[d]:
            bld.glue(t, side, b, _MIRROR_SIDE[side])
        piece.ports[DIRECTIONS.index(d)] = [(t, _OUTER_SIDE[d]), (b, _MIRROR_SIDE[_OUTER_SIDE[d]])]
    return piece


def _glue_ports(bld, pieces, g):
    ports = port_assignment(g)
    port_gluings = []
    for u, v in g.edges:
        pu, pv = ports[(u, v)], ports[(v, u)]
        for (sa, side_a), (sb, side_b) in zip(pieces[u].ports[pu], pieces[v].ports[pv]):
            bld.glue(sa, side_a, sb, side_b)
        port_gluings.append(((u, pu), (v, pv)))
    return port_gluings


def build_flat_surface(g):
    """Flat expander surface: one flat cross per vertex of a 4-regular graph.

    Ports are glued along the edges of ``g``; the boundary consists of one
    square hole of length 4 per piece.
    """
    _check_four_regular(g)
    bld = _Builder()
    pieces = []
    for u in range(g.n_vertices):
        p = _doubled_cross(bld, u, with_centre=False)
        p.kind = "flat-cross"
        pieces.append(p)
    bld.glue_chart_neighbours()
    port_gluings = _glue_ports(bld, pieces, g)
    c = PieceComplex("flat", bld.squares, bld.gluings, pieces, port_gluings)
    _check_gluings(c)
    return c


def maximal_tree(g, root=0):
    """BFS spanning tree from ``root`` with ascending-neighbour tie-break."""
    nbrs = g.neighbors()
    parent = {root: None}
    queue = deque([root])
    edges = []
    while queue:
        v = queue.popleft()
        for w in nbrs[v]:
            if w not in parent:
                parent[w] = v
                edges.append((min(v, w), max(v, w)))
                queue.append(w)
    if len(parent) != g.n_vertices:
        raise InputError("graph is disconnected; no spanning tree")
    return tuple(sorted(edges))


def build_connected_boundary_surface(g, tree=None):
    """Closed doubled crosses glued along ``g`` with a slit carved along ``tree``.

    The slit runs on the top sheets: through both arms of every tree edge
    and from each piece centre to its tree ports. Its edge is the single
    boundary curve of the surface.
    """
    _check_four_regular(g)
    if tree is None:
        tree = maximal_tree(g)
    tree = tuple(sorted((min(a, b), max(a, b)) for a, b in tree))
    eset = set(g.edges)
    if any(e not in eset for e in tree):
        raise InputError("tree contains an edge that is not in the graph")
    if len(tree) != g.n_vertices - 1:
        raise InputError("tree does not span the graph")
    t_graph = BoundaryGraph(g.n_vertices, tree, (0,))
    if not is_connected(t_graph):
        raise InputError("tree edges do not form a spanning tree")
    ports = port_assignment(g)
    tdirs = [set() for _ in range(g.n_vertices)]
    for u, v in tree:
        tdirs[u].add(DIRECTIONS[ports[(u, v)]])
        tdirs[v].add(DIRECTIONS[ports[(v, u)]])
    bld = _Builder()
    pieces = []
    for u in range(g.n_vertices):
        p = _doubled_cross(bld, u, with_centre=True, centre_slits=tdirs[u], arm_slits=tdirs[u])
        p.kind = f"carved-{len(tdirs[u])}"
        pieces.append(p)
    bld.glue_chart_neighbours()
    port_gluings = _glue_ports(bld, pieces, g)
    c = PieceComplex("carved", bld.squares, bld.gluings, pieces, port_gluings)
    _check_gluings(c)
    return c


def single_square():
    bld = _Builder()
    bld.add(0, 0, 0, 0)
    return PieceComplex("square", bld.squares, [], [Piece("square")])


def rectangle(width, height=1):
    bld = _Builder()
    for j in range(height):
        for i in range(width):
            bld.add(0, 0, i, j)
    bld.glue_chart_neighbours()
    return PieceComplex("rectangle", bld.squares, bld.gluings, [Piece("rectangle")])


def flat_cylinder(circumference=1, length=1):
    """``circumference x length`` squares with the left and right ends identified."""
    bld = _Builder()
    for j in range(length):
        for i in range(circumference):
            bld.add(0, 0, i, j)
    bld.glue_chart_neighbours()
    for j in range(length):
        bld.glue(bld.where[(0, circumference - 1, j)], 1, bld.where[(0, 0, j)], 3)
    return PieceComplex("cylinder", bld.squares, bld.gluings, [Piece("cylinder")])


def flat_torus():
    bld = _Builder()
    bld.add(0, 0, 0, 0)
    bld.glue(0, 1, 0, 3)
    bld.glue(0, 2, 0, 0)
    return PieceComplex("torus", bld.squares, bld.gluings, [Piece("torus")])


# --- meshing ----------------------------------------------------------------


def _band(m):
    # central cell indices: one cell for odd m, two for even m
    return [c for c in range(m) if abs((c + 0.5) / m - 0.5) < 1.0 / m]


def _cell_mask(slits, m):
    """Boolean ``(m, m)`` array indexed ``[j, i]`` (row, column); False = removed."""
    keep = np.ones((m, m), dtype=bool)
    if not slits:
        return keep
    band = _band(m)
    lo, hi = band[0], band[-1]
    rows = slice(lo, hi + 1)
    keep[rows, rows] = False
    if "E" in slits:
        keep[rows, lo:] = False
    if "W" in slits:
        keep[rows, : hi + 1] = False
    if "N" in slits:
        keep[lo:, rows] = False
    if "S" in slits:
        keep[: hi + 1, rows] = False
    return keep


def _side_index(side, q, m):
    # grid index (i, j) of the node at parameter q/m along a side (counterclockwise)
    if side == 0:
        return q, 0
    if side == 1:
        return m, q
    if side == 2:
        return m - q, m
    return 0, m - q


def complex_to_mesh(c, m=8):
    """Triangulate every square into ``2 m^2`` right triangles and apply the gluings.

    Nodes are numbered by first appearance, scanning squares in order and each
    square in raster order (rows bottom to top).
    """
    if m < 1:
        raise InputError("subdivision m must be >= 1")
    if any(sq.slits for sq in c.squares) and m < 3:
        raise InputError("slit pieces need m >= 3")
    if any(a == b for a, _, b, _ in c.gluings) and m < 3:
        # coarser grids would join two distinct edges between the same pair of nodes
        raise InputError("a square glued to itself needs m >= 3")
    ns = len(c.squares)
    per = (m + 1) ** 2

    def key(s, i, j):
        return s * per + j * (m + 1) + i

    rows, cols = [], []
    for a, sa, b, sb in c.gluings:
        for q in range(m + 1):
            ia, ja = _side_index(sa, q, m)
            ib, jb = _side_index(sb, m - q, m)
            rows.append(key(a, ia, ja))
            cols.append(key(b, ib, jb))
    total = ns * per
    ident = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(total, total))
    _, label = csgraph.connected_components(ident, directed=False)

    masks = [_cell_mask(sq.slits, m) for sq in c.squares]
    used = np.zeros(total, dtype=bool)
    tri_keys, tri_coords, tri_chart = [], [], []
    for s, sq in enumerate(c.squares):
        keep = masks[s]
        for j in range(m):
            for i in range(m):
                if not keep[j, i]:
                    continue
                p00, p10 = key(s, i, j), key(s, i + 1, j)
                p11, p01 = key(s, i + 1, j + 1), key(s, i, j + 1)
                x0, y0 = sq.x + i / m, sq.y + j / m
                x1, y1 = sq.x + (i + 1) / m, sq.y + (j + 1) / m
                tri_keys += [(p00, p10, p11), (p00, p11, p01)]
                tri_coords += [((x0, y0), (x1, y0), (x1, y1)), ((x0, y0), (x1, y1), (x0, y1))]
                tri_chart += [sq.chart, sq.chart]
                used[[p00, p10, p11, p01]] = True
    tri_keys = np.array(tri_keys, dtype=np.int64).reshape(-1, 3)

    # number classes by first appearance among used grid nodes
    new_id = {}
    for k in np.nonzero(used)[0]:
        lab = int(label[k])
        if lab not in new_id:
            new_id[lab] = len(new_id)
    remap = np.full(label.max() + 1, -1, dtype=np.int64)
    for lab, nid in new_id.items():
        remap[lab] = nid
    n = len(new_id)
    node_coords = np.zeros((n, 2))
    node_chart = np.zeros(n, dtype=np.int64)
    node_piece = np.zeros(n, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    idents = []
    for k in np.nonzero(used)[0]:
        s, rest = divmod(int(k), per)
        j, i = divmod(rest, m + 1)
        sq = c.squares[s]
        nid = remap[label[k]]
        x, y = sq.x + i / m, sq.y + j / m
        idents.append((nid, sq.chart, x, y))
        if not seen[nid]:
            seen[nid] = True
            node_coords[nid] = (x, y)
            node_chart[nid] = sq.chart
            node_piece[nid] = sq.piece
    mesh = FemMesh(
        node_coords=node_coords,
        node_chart=node_chart,
        triangles=remap[label[tri_keys]],
        tri_coords=np.array(tri_coords, dtype=float).reshape(-1, 3, 2),
        tri_chart=np.array(tri_chart, dtype=np.int64),
        identifications=np.array(idents, dtype=float).reshape(-1, 4),
        node_piece=node_piece,
        node_collar_t=np.full(n, np.inf),
        meta={"kind": c.kind, "m": m, "pieces": c.n_pieces},
    )
    mesh.topology()  # validates conformity and orientation
    return mesh
