import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decgmg.maps import matrix_of
from decgmg.mesh import build_dual, make_equilateral_grid, make_triangulated_grid, validate_complex
from decgmg.subdivision import binary_subdivide, cubic_subdivide, subdivide, subdivision_tower

from oracles import barycentric_columns


def _expected_counts(nv, ne, nt, n):
    # an order-n lattice adds n-1 points per edge and (n-1)(n-2)/2 per face;
    # each edge splits into n pieces and each face contributes 3 n(n-1)/2 interior edges
    return (
        nv + (n - 1) * ne + (n - 1) * (n - 2) // 2 * nt,
        n * ne + 3 * n * (n - 1) // 2 * nt,
        n * n * nt,
    )


@pytest.mark.parametrize("scheme,n", [("binary", 2), ("cubic", 3)])
def test_counts_follow_recurrence(base_mesh, scheme, n):
    c = base_mesh
    for _ in range(3):
        fine = subdivide(c, scheme).fine
        assert (fine.nv, fine.ne, fine.nt) == _expected_counts(c.nv, c.ne, c.nt, n)
        c = fine


def test_single_triangle_children():
    tri = make_equilateral_grid(1, 1)
    b = binary_subdivide(tri).fine
    cu = cubic_subdivide(tri).fine
    assert (b.nv, b.ne, b.nt) == (6, 9, 4)
    assert (cu.nv, cu.ne, cu.nt) == (10, 18, 9)


def test_tower_sizes(base_mesh):
    assert [r.fine.nv for r in subdivision_tower(base_mesh, "binary", 4)] == [4225, 1089, 289, 81]
    assert [r.fine.nv for r in subdivision_tower(base_mesh, "cubic", 3)] == [11881, 1369, 169]


def test_tower_is_composable(base_mesh):
    tower = subdivision_tower(base_mesh, "binary", 3)
    for fine, coarse in zip(tower, tower[1:]):
        assert fine.map.codomain is coarse.fine
    assert tower[-1].coarse is base_mesh
    with pytest.raises(ValueError):
        subdivision_tower(base_mesh, "binary", 0)


def test_unknown_scheme(base_mesh):
    with pytest.raises(ValueError, match="unknown subdivision scheme"):
        subdivide(base_mesh, "loop")


@pytest.mark.parametrize("fn", [binary_subdivide, cubic_subdivide])
def test_fine_mesh_and_map_valid(base_mesh, fn):
    res = fn(base_mesh)
    assert validate_complex(res.fine).is_valid
    assert res.map.diagnostics.is_valid
    assert res.fine.euler_characteristic() == base_mesh.euler_characteristic()
    assert np.all(build_dual(res.fine).dual_cell_area > 0)


@pytest.mark.parametrize("fn,n", [(binary_subdivide, 2), (cubic_subdivide, 3)])
def test_children_inherit_orientation_and_split_area(fn, n):
    c = make_triangulated_grid(2, 2)
    res = fn(c)
    p = res.fine.positions
    t = res.fine.oriented_triangles()
    cross = np.cross(p[t[:, 1]] - p[t[:, 0]], p[t[:, 2]] - p[t[:, 0]])[:, 2]
    assert np.all(cross > 0)
    parent_area = build_dual(c).tri_area
    child_area = (0.5 * cross).reshape(c.nt, n * n)
    assert np.allclose(child_area, parent_area[:, None] / n**2)


@pytest.mark.parametrize("fn", [binary_subdivide, cubic_subdivide])
def test_map_agrees_with_point_location(base_mesh, fn):
    res = fn(base_mesh)
    oracle = barycentric_columns(res.fine.positions, base_mesh)
    assert abs(matrix_of(res.map) - oracle).max() <= 1e-14


def test_provenance(base_mesh):
    res = cubic_subdivide(base_mesh)
    P, fp = base_mesh.positions, res.fine.positions
    kinds = [p[0] for p in res.provenance]
    assert kinds.count("vertex") == base_mesh.nv
    assert kinds.count("edge") == 2 * base_mesh.ne
    assert kinds.count("face") == base_mesh.nt
    for i, prov in enumerate(res.provenance):
        if prov[0] == "vertex":
            want = P[prov[1]]
        elif prov[0] == "edge":
            s, t = base_mesh.edges[prov[1]]
            want = (1 - prov[2]) * P[s] + prov[2] * P[t]
        else:
            tv = base_mesh.tri_vertices[prov[1]]
            want = np.asarray(prov[2]) @ P[tv]
        assert np.allclose(fp[i], want, atol=1e-14)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.sampled_from(["binary", "cubic"]))
def test_subdivision_preserves_total_area(nx, ny, scheme):
    c = make_triangulated_grid(nx, ny, 1.5, 0.7)
    fine = subdivide(c, scheme).fine
    assert np.isclose(build_dual(fine).total_area, 1.5 * 0.7, rtol=1e-13)
    assert validate_complex(fine).is_valid
