import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decgmg.mesh import (
    DegenerateTriangleError,
    EmbeddedComplex2D,
    MeshError,
    ObjParseError,
    build_dual,
    circumcenter,
    dump_json,
    load_json,
    make_equilateral_grid,
    make_triangulated_grid,
    read_obj,
    validate_complex,
    write_obj,
)

SQ3 = np.sqrt(3.0)


def test_base_mesh_counts(base_mesh):
    assert (base_mesh.nv, base_mesh.ne, base_mesh.nt) == (25, 56, 32)
    assert base_mesh.euler_characteristic() == 1
    assert validate_complex(base_mesh).is_valid


def test_grid_counts():
    c = make_triangulated_grid(128, 128)
    assert (c.nv, c.ne, c.nt) == (16641, 49408, 32768)
    assert validate_complex(c).is_valid


def test_single_triangle_and_small_grid():
    tri = make_equilateral_grid(1, 1)
    assert (tri.nv, tri.ne, tri.nt) == (3, 3, 1)
    g = make_triangulated_grid(2, 1)
    assert (g.nv, g.ne, g.nt) == (6, 9, 4)


def test_generators_produce_ccw_triangles(base_mesh, unit_grid):
    for c in (base_mesh, unit_grid):
        p = c.positions
        t = c.oriented_triangles()
        a, b, d = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
        assert np.all(np.cross(b - a, d - a)[:, 2] > 0)


def test_tri_vertices_sorted_and_consistent(base_mesh):
    tv = base_mesh.tri_vertices
    assert np.all(tv[:, 0] < tv[:, 1]) and np.all(tv[:, 1] < tv[:, 2])
    e = base_mesh.edges[base_mesh.triangles]
    # e0 = (v1, v2), e1 = (v0, v2), e2 = (v0, v1)
    assert np.array_equal(e[:, 0], tv[:, [1, 2]])
    assert np.array_equal(e[:, 1], tv[:, [0, 2]])
    assert np.array_equal(e[:, 2], tv[:, [0, 1]])


def test_edge_lookup(unit_grid):
    e = unit_grid.edges
    assert np.array_equal(unit_grid.edge_lookup(e[:, 0], e[:, 1]), np.arange(unit_grid.ne))
    assert np.array_equal(unit_grid.edge_lookup(e[:, 1], e[:, 0]), np.arange(unit_grid.ne))
    assert unit_grid.edge_lookup(np.array([0]), np.array([24]))[0] == -1


def _triangle():
    return EmbeddedComplex2D(
        positions=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        edges=np.array([[1, 2], [0, 2], [0, 1]]),
        triangles=np.array([[0, 1, 2]]),
    )


def test_explicit_complex_valid():
    c = _triangle()
    assert validate_complex(c).is_valid
    assert c.positions.shape == (3, 3)
    with pytest.raises(ValueError):
        c.positions[0, 0] = 5.0


@pytest.mark.parametrize(
    "edges,triangles,rule",
    [
        ([[1, 2], [0, 2], [0, 1]], [[0, 1, 5]], "triangle edge index out of range"),
        ([[1, 2], [0, 2], [0, 7]], [[0, 1, 2]], "edge vertex index out of range"),
        ([[1, 2], [0, 2], [1, 1]], [[0, 1, 2]], "degenerate edge"),
        ([[1, 2], [0, 2], [0, 1], [0, 1]], [[0, 1, 2]], "duplicate edge"),
        ([[1, 2], [0, 2], [0, 1]], [[0, 0, 2]], "repeated face"),
        ([[1, 2], [0, 2], [0, 1]], [[2, 1, 0]], "simplicial identity"),
        ([[1, 2], [0, 2], [0, 1], [1, 3]], [[0, 1, 2]], "dangling edge"),
    ],
)
def test_validation_rules(edges, triangles, rule):
    pos = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    c = EmbeddedComplex2D(positions=pos, edges=np.array(edges), triangles=np.array(triangles))
    diag = validate_complex(c)
    assert not diag.is_valid
    assert rule in diag.rules()


def test_dangling_vertex_and_duplicate_triangle():
    pos = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
    c = EmbeddedComplex2D(pos, np.array([[1, 2], [0, 2], [0, 1]]), np.array([[0, 1, 2], [0, 1, 2]]))
    rules = validate_complex(c).rules()
    assert "dangling vertex" in rules and "duplicate triangle" in rules
    with pytest.raises(MeshError):
        validate_complex(c).raise_if_invalid()


def test_nonfinite_position_reported():
    c = EmbeddedComplex2D(
        np.array([[0.0, 0.0], [np.nan, 0.0], [0.0, 1.0]]),
        np.array([[1, 2], [0, 2], [0, 1]]),
        np.array([[0, 1, 2]]),
    )
    assert "non-finite position" in validate_complex(c).rules()


def test_circumcenter_matches_linear_solve(rng):
    for _ in range(20):
        p = rng.random((3, 2)) * 4 - 2
        # oracle: |x - p0|^2 = |x - p1|^2 = |x - p2|^2 as a 2x2 linear system
        A = 2 * np.array([p[1] - p[0], p[2] - p[0]])
        b = np.array([p[1] @ p[1] - p[0] @ p[0], p[2] @ p[2] - p[0] @ p[0]])
        x = np.linalg.solve(A, b)
        cc = circumcenter(*(np.append(q, 0.0) for q in p))
        assert np.allclose(cc[:2], x, atol=1e-10)


def test_circumcenter_degenerate():
    with pytest.raises(DegenerateTriangleError):
        circumcenter(np.zeros(3), np.array([1.0, 0, 0]), np.array([2.0, 0, 0]))


def test_equilateral_dual_lengths_and_areas():
    s = 2.0
    c = make_equilateral_grid(4, 8, side=s)
    d = build_dual(c)
    counts = np.bincount(c.triangles.ravel(), minlength=c.ne)
    interior = counts == 2
    assert np.allclose(d.dual_edge_length[interior], s / SQ3)
    assert np.allclose(d.dual_edge_length[~interior], s / (2 * SQ3))
    hex_vertices = np.flatnonzero(c.vertex_degree() == 6)
    assert len(hex_vertices) > 0
    assert np.allclose(d.dual_cell_area[hex_vertices], s * s * SQ3 / 2)
    assert np.isclose(d.dual_cell_area.sum(), d.total_area)


def test_right_triangle_diagonal_has_zero_dual_edge(unit_grid):
    d = build_dual(unit_grid)
    p = unit_grid.positions
    diag = np.all(np.abs(p[unit_grid.edges[:, 1]] - p[unit_grid.edges[:, 0]]) > 1e-12, axis=1)
    assert np.allclose(d.dual_edge_length[diag], 0.0, atol=1e-14)
    assert np.isclose(d.dual_cell_area.sum(), 1.0)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 5),
    st.integers(1, 5),
    st.floats(0.1, 3.0),
    st.floats(0.1, 3.0),
)
def test_dual_areas_tile_the_domain(nx, ny, lx, ly):
    c = make_triangulated_grid(nx, ny, lx, ly)
    d = build_dual(c)
    assert np.isclose(d.dual_cell_area.sum(), lx * ly, rtol=1e-12)
    assert c.euler_characteristic() == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.integers(1, 9))
def test_equilateral_grid_is_valid(rows, cols):
    c = make_equilateral_grid(rows, cols)
    assert validate_complex(c).is_valid
    assert c.nt == rows * cols
    assert c.euler_characteristic() == 1


def test_obj_roundtrip(tmp_path, base_mesh):
    p = tmp_path / "m.obj"
    write_obj(base_mesh, p, scalars=np.arange(base_mesh.nv))
    back = read_obj(p)
    assert back.digest == base_mesh.digest
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "vertex,value"


def test_json_roundtrip(tmp_path, base_mesh):
    p = tmp_path / "m.json"
    dump_json(base_mesh, p)
    assert load_json(p).digest == base_mesh.digest


def test_obj_ignores_attributes_and_accepts_slash_faces(tmp_path):
    p = tmp_path / "a.obj"
    p.write_text("# c\nmtllib x.mtl\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\ns off\nf 1/1/1 2/2/1 3//1\n")
    c = read_obj(p)
    assert (c.nv, c.ne, c.nt) == (3, 3, 1)


@pytest.mark.parametrize(
    "text,line",
    [
        ("v 0 0 0\nv 1 0\n", 2),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n", 5),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n", 4),
        ("v 0 0 0\nfoo 1\n", 2),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 two 3\n", 4),
    ],
)
def test_obj_errors_report_line(tmp_path, text, line):
    p = tmp_path / "bad.obj"
    p.write_text(text)
    with pytest.raises(ObjParseError) as err:
        read_obj(p)
    assert err.value.lineno == line
    assert f"line {line}" in str(err.value)
