import numpy as np
import pytest
import scipy.io
from hypothesis import given, settings
from hypothesis import strategies as st

from decgmg.mesh import build_dual, make_equilateral_grid, make_triangulated_grid
from decgmg.operators import (
    Cochain,
    CochainError,
    DECOperators,
    codifferential_1,
    d0,
    d1,
    dual_d1,
    export_matrix_market,
    flat,
    hodge_star_0,
    hodge_star_0_inv,
    hodge_star_1,
    laplacian_0,
    lie_derivative_0,
    wedge_01,
)
from decgmg.subdivision import cubic_subdivide


def _perturbed_grid(seed=3):
    c = make_triangulated_grid(6, 6)
    rng = np.random.default_rng(seed)
    p = c.positions.copy()
    inner = (p[:, 0] > 0) & (p[:, 0] < 1) & (p[:, 1] > 0) & (p[:, 1] < 1)
    p[inner, :2] += rng.uniform(-0.03, 0.03, (inner.sum(), 2))
    return type(c)(p, c.edges, c.triangles, c.tri_orientation)


MESHES = {
    "equilateral": lambda: make_equilateral_grid(4, 8),
    "grid": lambda: make_triangulated_grid(5, 3, 2.0, 1.0),
    "cubic": lambda: cubic_subdivide(make_equilateral_grid(2, 3)).fine,
    "perturbed": _perturbed_grid,
}


def _interior(c):
    counts = np.bincount(c.triangles.ravel(), minlength=c.ne)
    bnd = np.unique(c.edges[counts == 1])
    mask = np.ones(c.nv, bool)
    mask[bnd] = False
    return mask


@pytest.fixture(params=list(MESHES))
def mesh(request):
    return MESHES[request.param]()


def test_d0_single_edge_signs():
    c = make_equilateral_grid(1, 1)
    D = d0(c).toarray()
    for k, (s, t) in enumerate(c.edges):
        assert D[k, s] == -1 and D[k, t] == 1
        assert np.count_nonzero(D[k]) == 2


def test_d1_d0_is_exactly_zero(mesh):
    assert (d1(mesh) @ d0(mesh)).count_nonzero() == 0


def test_d1_orientation_matches_boundary_cycle(mesh):
    # oracle: circulation of the cycle (a, b, c) using edge directions
    D1 = d1(mesh).toarray()
    cyc = mesh.oriented_triangles()
    for t in range(mesh.nt):
        want = np.zeros(mesh.ne)
        for u, v in ((0, 1), (1, 2), (2, 0)):
            a, b = cyc[t, u], cyc[t, v]
            e = mesh.edge_lookup(np.array([a]), np.array([b]))[0]
            want[e] += 1.0 if mesh.edges[e, 0] == a else -1.0
        assert np.array_equal(D1[t], want)


def test_dual_d1_is_minus_transpose(mesh):
    assert abs(dual_d1(mesh) + d0(mesh).T).max() == 0


def test_laplacian_kills_constants(mesh):
    L = laplacian_0(build_dual(mesh))
    assert np.max(np.abs(L @ np.ones(mesh.nv))) <= 1e-12


def test_laplacian_star0_symmetric(mesh):
    dual = build_dual(mesh)
    S = hodge_star_0(dual) @ laplacian_0(dual)
    assert abs(S - S.T).max() <= 1e-10


def test_laplacian_matches_explicit_product(mesh):
    dual = build_dual(mesh)
    L = laplacian_0(dual)
    P = hodge_star_0_inv(dual) @ dual_d1(mesh) @ hodge_star_1(dual) @ d0(mesh)
    assert abs(L - P).max() <= 1e-12 * abs(P).max()


def test_laplacian_keeps_full_stencil(mesh):
    L = laplacian_0(build_dual(mesh)).tocsr()
    assert np.array_equal(np.diff(L.indptr), mesh.vertex_degree() + 1)


@pytest.mark.parametrize("name", ["equilateral", "grid", "cubic"])
def test_laplacian_of_quadratic_is_two(name):
    c = MESHES[name]()
    L = laplacian_0(build_dual(c))
    x = c.positions[:, 0]
    assert np.allclose((L @ x**2)[_interior(c)], 2.0, atol=1e-9)


def test_laplacian_of_linear_is_zero_inside(mesh):
    L = laplacian_0(build_dual(mesh))
    f = 3 * mesh.positions[:, 0] - 2 * mesh.positions[:, 1] + 1
    assert np.allclose((L @ f)[_interior(mesh)], 0.0, atol=1e-10)


def test_hodge_star_1_equilateral():
    c = make_equilateral_grid(2, 4, side=1.0)
    s1 = hodge_star_1(build_dual(c)).diagonal()
    counts = np.bincount(c.triangles.ravel(), minlength=c.ne)
    assert np.allclose(s1[counts == 2], 1 / np.sqrt(3))


def test_star0_inverse():
    dual = build_dual(make_equilateral_grid(3, 5))
    I = hodge_star_0(dual) @ hodge_star_0_inv(dual)
    assert np.allclose(I.diagonal(), 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_codifferential_is_adjoint_of_d0(seed):
    c = make_equilateral_grid(3, 5)
    ops = DECOperators(c)
    rng = np.random.default_rng(seed)
    f, a = rng.standard_normal(c.nv), rng.standard_normal(c.ne)
    lhs = np.sum(ops.area * f * ops.codiff(a))
    rhs = -np.sum(ops.star1_diag * ops.grad(f) * a)
    assert np.isclose(lhs, rhs, rtol=1e-10, atol=1e-10)


def test_codiff_of_d0_is_laplacian(mesh):
    ops = DECOperators(mesh)
    x = np.random.default_rng(0).standard_normal(mesh.nv)
    assert np.allclose(ops.codiff(ops.grad(x)), ops.laplacian @ x, atol=1e-10)


def test_cochain_wrappers_agree_with_fast_paths(mesh):
    ops = DECOperators(mesh)
    rng = np.random.default_rng(1)
    f = Cochain(rng.standard_normal(mesh.nv), 0, mesh)
    a = Cochain(rng.standard_normal(mesh.ne), 1, mesh)
    assert np.allclose(codifferential_1(a, ops.dual).values, ops.codiff(a.values))
    assert np.allclose(wedge_01(f, a).values, ops.wedge01(f.values, a.values))
    assert np.allclose(lie_derivative_0(a, f, ops.dual).values, ops.lie(a.values, f.values))


def test_flat_of_constant_field_is_exact_gradient(mesh):
    V = np.array([0.3, -1.2, 0.0])
    pot = mesh.positions @ V
    assert np.allclose(flat(V, mesh).values, d0(mesh) @ pot, atol=1e-13)


def test_wedge_with_constant_is_scaling(mesh):
    a = Cochain(np.arange(mesh.ne, dtype=float), 1, mesh)
    one = Cochain(np.full(mesh.nv, 2.5), 0, mesh)
    assert np.array_equal(wedge_01(one, a).values, 2.5 * a.values)


@pytest.mark.parametrize("name", ["equilateral", "grid", "cubic"])
def test_lie_derivative_of_linear_field_is_exact(name):
    c = MESHES[name]()
    ops = DECOperators(c)
    T = 2 * c.positions[:, 0] + 0.5 * c.positions[:, 1]
    q = ops.flat(np.array([1.0, -3.0, 0.0]))
    assert np.allclose(ops.lie(q, T)[_interior(c)], 2 - 1.5, atol=1e-10)


def test_lie_derivative_vanishes_for_constant_T(mesh):
    ops = DECOperators(mesh)
    q = np.random.default_rng(2).standard_normal(mesh.ne)
    assert np.max(np.abs(ops.lie(q, np.full(mesh.nv, 7.0)))) == 0.0


def test_cochain_errors(base_mesh):
    with pytest.raises(CochainError):
        Cochain(np.zeros(3), 0, base_mesh)
    with pytest.raises(CochainError):
        Cochain(np.zeros(base_mesh.nv), 3, base_mesh)
    a = Cochain(np.zeros(base_mesh.ne), 1, base_mesh)
    with pytest.raises(CochainError):
        a.check(0, base_mesh)
    f = Cochain(np.zeros(base_mesh.nv), 0, base_mesh)
    with pytest.raises(CochainError):
        wedge_01(a, f)


def test_dual_cochain_sizes(base_mesh):
    assert len(Cochain(np.zeros(base_mesh.nt), 0, base_mesh, primal=False)) == base_mesh.nt
    assert len(Cochain(np.zeros(base_mesh.nv), 2, base_mesh, primal=False)) == base_mesh.nv


def test_clamped_star0_handles_non_well_centered_cells():
    c = make_triangulated_grid(1, 1)
    p = c.positions.copy()
    # squash into an obtuse configuration: a vertex with negative signed dual area
    p[3, :2] = [0.2, 0.05]
    bad = type(c)(p, c.edges, c.triangles, c.tri_orientation)
    dual = build_dual(bad)
    if np.all(dual.dual_cell_area > 0):
        pytest.skip("configuration stayed well centered")
    with pytest.raises(ValueError, match="non-well-centered"):
        hodge_star_0_inv(dual)
    assert np.all(np.isfinite(hodge_star_0_inv(dual, clamp=True).diagonal()))


def test_matrix_market_export(tmp_path, base_mesh):
    L = laplacian_0(build_dual(base_mesh))
    p = tmp_path / "L.mtx"
    export_matrix_market(L, p, comment="laplacian")
    assert abs(scipy.io.mmread(str(p)) - L).max() == 0
