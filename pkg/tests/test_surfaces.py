import io

import numpy as np
import pytest

from steklov_lab.errors import InputError, StructuralError
from steklov_lab.graphs import cycle_graph, lattice_graph, path_graph, random_regular_graph
from steklov_lab.mesh import (
    attach_collar,
    boundary_components,
    dilate,
    euler_genus,
    mesh_components,
    mesh_to_text,
    read_mesh,
)
from steklov_lab.surfaces import (
    build_connected_boundary_surface,
    build_flat_surface,
    build_lattice_domain,
    complex_to_mesh,
    flat_cylinder,
    flat_torus,
    maximal_tree,
    port_assignment,
    rectangle,
    single_square,
)

K5 = random_regular_graph(5, 4, 1)


def test_single_square_mesh():
    m = complex_to_mesh(single_square(), 1)
    assert (m.n_nodes, m.n_triangles, len(m.boundary_edges)) == (4, 2, 4)
    assert boundary_components(m) == (1, [4.0])
    assert euler_genus(m) == (1, 0, 1)


def test_triangle_count_per_square():
    for m in (1, 3, 8):
        mesh = complex_to_mesh(rectangle(3, 2), m)
        assert mesh.n_triangles == 6 * 2 * m * m
        assert mesh.area() == pytest.approx(6.0)
        assert np.all(mesh.triangle_areas() > 0)


def test_two_squares_share_nodes():
    m = complex_to_mesh(rectangle(2, 1), 2)
    assert m.n_nodes == 15
    assert euler_genus(m)[0] == 1
    assert boundary_components(m) == (1, [6.0])


def test_torus_and_cylinder():
    assert euler_genus(complex_to_mesh(flat_torus(), 4)) == (0, 1, 0)
    cyl = complex_to_mesh(flat_cylinder(), 4)
    assert euler_genus(cyl) == (0, 0, 2)
    assert sorted(boundary_components(cyl)[1]) == [1.0, 1.0]


def test_lattice_pieces():
    c1 = build_lattice_domain(1)
    assert c1.piece_kinds() == {"D2": 4}
    c2 = build_lattice_domain(2)
    assert c2.piece_kinds() == {"D2": 4, "D3": 4, "D4": 1}
    with pytest.raises(InputError):
        build_lattice_domain(0)


@pytest.mark.parametrize("l", [1, 2, 3])
def test_lattice_topology(l):
    mesh = complex_to_mesh(build_lattice_domain(l), 2)
    chi, genus, b = euler_genus(mesh)
    assert genus == 0 and b == l * l + 1
    assert mesh.area() == pytest.approx(build_lattice_domain(l).area(2))
    # every hole is a 2 x 2 square
    lengths = sorted(boundary_components(mesh)[1])
    assert lengths[: l * l] == [8.0] * (l * l)


def test_lattice_area_perimeter_growth():
    # both Theta(l^2): the ratios settle into fixed brackets
    for l in (2, 4, 6):
        mesh = complex_to_mesh(build_lattice_domain(l), 1)
        area = mesh.area()
        length = mesh.boundary_lengths.sum()
        assert 4.0 <= area / l**2 <= 12.0
        assert 8.0 <= length / l**2 <= 16.0


def test_port_assignment_sorted():
    ports = port_assignment(K5)
    assert ports[(0, 1)] == 0 and ports[(0, 4)] == 3
    assert set(ports[(2, v)] for v in (0, 1, 3, 4)) == {0, 1, 2, 3}


def test_flat_surface_k5():
    c = build_flat_surface(K5)
    assert c.n_pieces == 5 and len(c.port_gluings) == 10
    mesh = complex_to_mesh(c, 4)
    chi, genus, b = euler_genus(mesh)
    assert genus == 6 and b == 5
    assert boundary_components(mesh)[1] == [4.0] * 5


@pytest.mark.parametrize("n, m", [(8, 4), (12, 5)])
def test_flat_surface_genus(n, m):
    g = random_regular_graph(n, 4, n)
    mesh = complex_to_mesh(build_flat_surface(g), m)
    assert euler_genus(mesh)[1:] == (n + 1, n)


def test_flat_surface_rejects_bad_graphs():
    with pytest.raises(InputError):
        build_flat_surface(path_graph(4))
    with pytest.raises(InputError):
        build_connected_boundary_surface(lattice_graph(2))


def test_maximal_tree():
    tree = maximal_tree(cycle_graph(4))
    assert len(tree) == 3
    assert tree == ((0, 1), (0, 3), (1, 2))
    p = path_graph(5)
    assert maximal_tree(p) == p.edges


def test_carved_surface_k5():
    c = build_connected_boundary_surface(K5)
    mesh = complex_to_mesh(c, 4)
    assert boundary_components(mesh)[0] == 1
    assert euler_genus(mesh)[1:] == (6, 1)


@pytest.mark.parametrize("n, m", [(8, 3), (12, 8), (16, 5)])
def test_carved_surface_single_boundary(n, m):
    g = random_regular_graph(n, 4, 100 + n)
    mesh = complex_to_mesh(build_connected_boundary_surface(g), m)
    flat = complex_to_mesh(build_flat_surface(g), m)
    chi, genus, b = euler_genus(mesh)
    assert b == 1 and genus == n + 1
    # carving opens n - 1 fewer holes than the flat surface but keeps the genus
    assert chi == euler_genus(flat)[0] + (n - 1)


def test_carved_rejects_bad_tree():
    with pytest.raises(InputError):
        build_connected_boundary_surface(K5, tree=((0, 1), (1, 2)))
    with pytest.raises(InputError):
        build_connected_boundary_surface(K5, tree=((0, 1), (0, 2), (1, 2), (3, 4)))
    with pytest.raises(InputError):
        complex_to_mesh(build_connected_boundary_surface(K5), 2)


def test_orientation_error_names_triangle():
    mesh = complex_to_mesh(rectangle(2, 1), 2)
    tri = mesh.triangles.copy()
    tc = mesh.tri_coords.copy()
    # reflect one triangle in its chart: the surface stays non-degenerate but flips orientation
    tri[0] = tri[0][[0, 2, 1]]
    tc[0] = tc[0][[0, 2, 1]]
    tc[0, :, 0] *= -1
    bad = mesh.copy_with(triangles=tri, tri_coords=tc)
    with pytest.raises(StructuralError):
        bad.topology()


def test_soff_round_trip():
    mesh = attach_collar(complex_to_mesh(build_lattice_domain(1), 2), 1.0, 2)
    text = mesh_to_text(mesh)
    back = read_mesh(io.StringIO(text))
    assert mesh_to_text(back) == text
    assert np.array_equal(back.tri_coords, mesh.tri_coords)
    assert np.array_equal(back.node_collar_t, mesh.node_collar_t)
    with pytest.raises(InputError):
        read_mesh(io.StringIO("OFF\n"))


def test_collar_geometry():
    core = complex_to_mesh(build_lattice_domain(1), 4)
    mesh = attach_collar(core, 1.0, 4)
    length = core.boundary_lengths.sum()
    assert mesh.area() == pytest.approx(core.area() + length * 1.0)
    assert euler_genus(mesh) == euler_genus(core)
    assert mesh.boundary_lengths.sum() == pytest.approx(length)
    t = mesh.node_collar_t
    assert np.all(t[mesh.boundary_nodes()] == 0.0)
    # the old boundary sits at full collar depth; the rest of the core is unmarked
    old = core.boundary_nodes()
    assert np.all(t[old] == 1.0)
    assert np.isinf(np.delete(t[: core.n_nodes], old)).all()
    assert set(np.unique(t[np.isfinite(t)])) == {0.0, 0.25, 0.5, 0.75, 1.0}
    assert mesh_components(mesh)[0] == 1


def test_dilate_scales_area():
    mesh = complex_to_mesh(rectangle(2, 1), 3)
    assert dilate(mesh, 2.0).area() == pytest.approx(4 * mesh.area())


def test_self_glued_square_needs_m3():
    for c in (flat_torus(), flat_cylinder()):
        with pytest.raises(InputError):
            complex_to_mesh(c, 2)
        complex_to_mesh(c, 3).topology()
