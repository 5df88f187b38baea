"""Grid motion: maps, velocities, polynomial interval geometry, conservation."""

import math

import numpy as np
import pytest

from alefem import ale
from alefem.mesh import build_unit_square_mesh


@pytest.fixture(scope="module")
def mesh():
    return build_unit_square_mesh(8, 8)


# ---------------------------------------------------------------------------
# prescribed maps and displacement sampling


def test_identity_map_zero_displacement(mesh):
    d = ale.sample_displacement(ale.IdentityMap(), mesh, 0.37)
    assert d.shape == (mesh.n_nodes, 2)
    assert np.all(d == 0.0)


def test_uniform_scale_at_zero_and_quarter_period(mesh):
    m = ale.UniformScaleMap()  # a(t) = 2 - cos(20 pi t)
    d0 = ale.sample_displacement(m, mesh, 0.0)
    np.testing.assert_allclose(d0, 0.0, atol=1e-15)
    # 20 pi t = pi/2 at t = 0.025, so a = 2 and the displacement is x itself
    d = ale.sample_displacement(m, mesh, 0.025)
    np.testing.assert_allclose(d, mesh.nodes, rtol=0, atol=1e-13)


def test_interior_maps_preserve_the_boundary(mesh):
    # map-b pins boundary nodes; map-a may slide them tangentially but keeps
    # the square invariant (zero normal displacement on each side)
    d = ale.sample_displacement(ale.prescribed_map("map-b"), mesh, 0.4)
    np.testing.assert_allclose(d[mesh.boundary_node_set()], 0.0, atol=1e-15)

    d = ale.sample_displacement(ale.prescribed_map("map-a"), mesh, 0.4)
    assert np.all(np.isfinite(d))
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    for side in (x == 0.0, x == 1.0):
        np.testing.assert_allclose(d[side, 0], 0.0, atol=1e-15)
    for side in (y == 0.0, y == 1.0):
        np.testing.assert_allclose(d[side, 1], 0.0, atol=1e-15)


def test_map_b_components_equal(mesh):
    d = ale.sample_displacement(ale.prescribed_map("map-b"), mesh, 0.3)
    np.testing.assert_allclose(d[:, 0], d[:, 1], rtol=0, atol=0)


def test_prescribed_map_factory():
    m = ale.prescribed_map("uniform-scale", c0=3.0, c1=0.5, omega=math.pi)
    assert m.scale(1.0) == pytest.approx(3.5)
    with pytest.raises(ValueError):
        ale.prescribed_map("banana")


# ---------------------------------------------------------------------------
# grid velocities


def test_piecewise_constant_velocity(mesh):
    u0 = np.zeros((mesh.n_nodes, 2))
    u1 = mesh.nodes.copy()
    vel = ale.velocity_piecewise_constant(u0, u1, 0.1)
    np.testing.assert_allclose(vel.at(0.0), 10.0 * mesh.nodes, atol=1e-13)
    np.testing.assert_allclose(vel.at(0.1), vel.at(0.0), atol=0)
    np.testing.assert_allclose(vel.integral(), u1 - u0, rtol=0, atol=1e-14)

    same = ale.velocity_piecewise_constant(u1, u1, 0.1)
    assert np.all(same.at(0.05) == 0.0)


def test_continuous_velocity_integral_and_start(mesh):
    rng = np.random.default_rng(3)
    u0 = 0.01 * rng.standard_normal((mesh.n_nodes, 2))
    u1 = 0.01 * rng.standard_normal((mesh.n_nodes, 2))
    v = 0.3 * rng.standard_normal((mesh.n_nodes, 2))
    vel = ale.velocity_continuous(u0, u1, 0.05, w_prev_end=v)
    np.testing.assert_allclose(vel.at(0.0), v, rtol=0, atol=0)
    np.testing.assert_allclose(vel.integral(), u1 - u0, rtol=0, atol=1e-14)


def test_continuous_velocity_closed_loop(mesh):
    # no net motion but nonzero entry velocity: the node traces a loop and
    # exits with the opposite velocity
    u = 0.02 * mesh.nodes
    v = np.ones((mesh.n_nodes, 2))
    vel = ale.velocity_continuous(u, u, 0.1, w_prev_end=v)
    np.testing.assert_allclose(vel.w1, -2.0 * v / 0.1, rtol=1e-14)
    np.testing.assert_allclose(vel.end, -v, rtol=0, atol=1e-13)
    np.testing.assert_allclose(vel.integral(), 0.0, rtol=0, atol=1e-14)


def test_continuous_velocity_consistency_reductions(mesh):
    u0 = np.zeros((mesh.n_nodes, 2))
    u1 = mesh.nodes.copy()
    # matching entry velocity -> zero rate, constant velocity
    vel = ale.velocity_continuous(u0, u1, 0.5, w_prev_end=(u1 - u0) / 0.5)
    np.testing.assert_allclose(vel.w1, 0.0, atol=1e-14)
    # zero entry velocity over unit interval: rate 2 du, end velocity 2 du
    vel = ale.velocity_continuous(u0, u1, 1.0, w_prev_end=np.zeros_like(u0))
    np.testing.assert_allclose(vel.w1, 2.0 * u1, atol=1e-14)
    np.testing.assert_allclose(vel.end, 2.0 * u1, atol=1e-14)
    # first interval without history degenerates to the constant choice
    vel = ale.velocity_continuous(u0, u1, 0.5)
    np.testing.assert_allclose(vel.w1, 0.0, atol=1e-14)


def test_make_velocity_rejects_unknown_strategy(mesh):
    u = np.zeros((mesh.n_nodes, 2))
    with pytest.raises(ValueError):
        ale.make_velocity("linear", u, u, 0.1)


# ---------------------------------------------------------------------------
# deformation gradient, cofactor, jacobian


def test_def_gradient_identity_and_uniform_scale(mesh):
    zero = np.zeros((mesh.n_nodes, 2))
    np.testing.assert_allclose(ale.element_def_gradient(mesh, zero, 5), np.eye(2), atol=0)

    a = 2.4
    disp = (a - 1.0) * mesh.nodes
    for e in (0, 17, mesh.n_triangles - 1):
        np.testing.assert_allclose(ale.element_def_gradient(mesh, disp, e),
                                   a * np.eye(2), rtol=0, atol=1e-13)


def _interpolant_fd_gradient(mesh, disp, elem, h=1e-4):
    """Central differences of the P1 displacement interpolant around the
    element centroid; stays strictly inside the element."""
    tri = mesh.triangles[elem]
    p = mesh.nodes[tri]
    centroid = p.mean(axis=0)

    def interp(pt):
        # barycentric solve on this element only
        T = np.column_stack([p[1] - p[0], p[2] - p[0]])
        lam12 = np.linalg.solve(T, pt - p[0])
        lam = np.array([1.0 - lam12.sum(), *lam12])
        return lam @ disp[tri]

    g = np.empty((2, 2))
    for j in range(2):
        step = np.zeros(2)
        step[j] = h
        g[:, j] = (interp(centroid + step) - interp(centroid - step)) / (2 * h)
    return g


def test_def_gradient_matches_fd_of_interpolant():
    mesh = build_unit_square_mesh(40, 40)
    motion = ale.prescribed_map("map-b")
    disp = ale.sample_displacement(motion, mesh, 0.5)
    # element whose centroid is nearest the domain center
    cents = mesh.nodes[mesh.triangles].mean(axis=1)
    elem = int(np.argmin(np.sum((cents - 0.5) ** 2, axis=1)))
    G = ale.element_def_gradient(mesh, disp, elem)
    fd = np.eye(2) + _interpolant_fd_gradient(mesh, disp, elem)
    np.testing.assert_allclose(G, fd, rtol=0, atol=1e-6)


def test_def_gradient_converges_to_analytic_map():
    # the P1 interpolant's gradient at the centroid approaches the analytic
    # gradient under refinement
    motion = ale.prescribed_map("map-b")

    def gap(nx):
        mesh = build_unit_square_mesh(nx, nx)
        disp = ale.sample_displacement(motion, mesh, 0.5)
        cents = mesh.nodes[mesh.triangles].mean(axis=1)
        elem = int(np.argmin(np.sum((cents - np.array([0.3, 0.7])) ** 2, axis=1)))
        G = ale.element_def_gradient(mesh, disp, elem)
        x, y = cents[elem]
        s = 1.0  # sin(pi/2)
        gxx = s * (1 - 2 * x) * y * (1 - y)
        gxy = s * x * (1 - x) * (1 - 2 * y)
        analytic = np.eye(2) + np.array([[gxx, gxy], [gxx, gxy]])
        return np.abs(G - analytic).max()

    gaps = [gap(nx) for nx in (10, 20, 40)]
    assert gaps[1] < gaps[0] and gaps[2] < gaps[1]
    assert gaps[2] < 5e-3


def test_cofactor_examples():
    np.testing.assert_allclose(ale.cofactor2d(np.eye(2)), np.eye(2), atol=0)
    g = np.array([[3.0, 1.0], [2.0, 5.0]])
    c = ale.cofactor2d(g)
    np.testing.assert_allclose(c, [[5.0, -1.0], [-2.0, 3.0]], atol=0)
    np.testing.assert_allclose(g @ c, np.linalg.det(g) * np.eye(2), rtol=1e-14)
    # defined for singular input too
    sing = np.array([[1.0, 2.0], [2.0, 4.0]])
    np.testing.assert_allclose(sing @ ale.cofactor2d(sing), 0.0, atol=1e-14)


def test_cofactor_fuzz_seeded():
    rng = np.random.default_rng(911)
    g = rng.uniform(-3.0, 3.0, (500, 2, 2))
    c = ale.cofactor2d(g)
    identity = np.einsum("nij,njk->nik", g, c)
    target = ale.jacobian(g)[:, None, None] * np.eye(2)
    np.testing.assert_allclose(identity, target, rtol=0, atol=1e-12)


def test_cofactor_linearity():
    # the cofactor of a matrix polynomial is the termwise cofactor
    rng = np.random.default_rng(8)
    a, b = rng.standard_normal((2, 2, 2))
    for t in (0.0, 0.3, 1.7):
        np.testing.assert_allclose(ale.cofactor2d(a + t * b),
                                   ale.cofactor2d(a) + t * ale.cofactor2d(b),
                                   rtol=0, atol=1e-13)


# ---------------------------------------------------------------------------
# interval geometry


def test_uniform_scale_worked_example(mesh):
    # a jumps from 1 to 2 over dt = 0.1 with constant velocity 10 x:
    # flux integral is 1.5 x per element, its divergence 3 = J(dt) - J(0)
    u0 = np.zeros((mesh.n_nodes, 2))
    u1 = mesh.nodes.copy()
    vel = ale.velocity_piecewise_constant(u0, u1, 0.1)
    geom = ale.build_interval_geometry(mesh, u0, vel)

    np.testing.assert_allclose(geom.J_at(0.0), 1.0, rtol=1e-13)
    np.testing.assert_allclose(geom.J_at(0.1), 4.0, rtol=1e-13)
    corners = mesh.nodes[mesh.triangles]
    np.testing.assert_allclose(geom.int_flux, 1.5 * corners, rtol=0, atol=1e-12)
    np.testing.assert_allclose(geom.div_int_flux, 3.0, rtol=1e-12)

    flux_elem, div_elem = ale.integrated_flux_field(geom, 7)
    np.testing.assert_allclose(flux_elem, 1.5 * corners[7], atol=1e-12)
    assert div_elem == pytest.approx(3.0, rel=1e-12)

    # the endpoint surrogate overshoots: div(dt C(dt) w) = 0.1 * 2 * 10 * 2
    n_flux, n_div = geom.endpoint_flux()
    np.testing.assert_allclose(n_flux, 2.0 * corners, rtol=0, atol=1e-12)
    np.testing.assert_allclose(n_div, 4.0, rtol=1e-12)


@pytest.mark.parametrize("strategy,g_len,j_len,f_len", [("dc", 2, 3, 2), ("c", 3, 5, 4)])
def test_polynomial_degrees(mesh, strategy, g_len, j_len, f_len):
    motion = ale.prescribed_map("map-a")
    u0 = ale.sample_displacement(motion, mesh, 0.0)
    u1 = ale.sample_displacement(motion, mesh, 0.05)
    vel = ale.make_velocity(strategy, u0, u1, 0.05,
                            None if strategy == "dc" else 0.1 * mesh.nodes)
    geom = ale.build_interval_geometry(mesh, u0, vel)
    assert geom.G.shape[-1] == g_len
    assert geom.J.shape[-1] == j_len
    assert geom.flux.shape[-1] == f_len


@pytest.mark.parametrize("map_id", ["uniform-scale", "map-a", "map-b"])
@pytest.mark.parametrize("strategy", ["dc", "c"])
def test_cofactor_identity_along_interval(mesh, map_id, strategy):
    motion = ale.prescribed_map(map_id)
    geom = next(ale.interval_geometries(mesh, motion, strategy, 0.02, 1))
    for s in (0.0, 0.25, 0.5, 0.75, 1.0):
        t = s * geom.dt
        lhs = np.einsum("eij,ejk->eik", geom.G_at(t), geom.C_at(t))
        rhs = geom.J_at(t)[:, None, None] * np.eye(2)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)


@pytest.mark.parametrize("map_id", ["uniform-scale", "map-a", "map-b"])
@pytest.mark.parametrize("strategy", ["dc", "c"])
def test_pointwise_conservation_identity(mesh, map_id, strategy):
    # per element the Jacobian increment equals the divergence of the exact
    # flux integral; this is the differential conservation statement
    motion = ale.prescribed_map(map_id)
    for geom in ale.interval_geometries(mesh, motion, strategy, 0.05, 4):
        jump = geom.J_at(geom.dt) - geom.J_at(0.0)
        np.testing.assert_allclose(jump, geom.div_int_flux, rtol=0, atol=1e-12)


def test_closed_loop_keeps_jacobian(mesh):
    u = 0.05 * np.ones((mesh.n_nodes, 2)) * mesh.nodes
    v = 2.0 * np.ones((mesh.n_nodes, 2))
    vel = ale.velocity_continuous(u, u, 0.05, w_prev_end=v)
    geom = ale.build_interval_geometry(mesh, u, vel)
    np.testing.assert_allclose(geom.J_at(0.05), geom.J_at(0.0), rtol=1e-13)
    np.testing.assert_allclose(geom.div_int_flux, 0.0, atol=1e-13)


@pytest.mark.parametrize("strategy", ["dc", "c"])
def test_scl_residual_vanishes(mesh, strategy):
    for map_id in ("uniform-scale", "map-a", "map-b"):
        motion = ale.prescribed_map(map_id)
        for geom in ale.interval_geometries(mesh, motion, strategy, 0.05, 3):
            r = ale.scl_residual(mesh, geom)
            assert np.abs(r).max() <= 1e-12


def test_scl_residual_flags_endpoint_surrogate(mesh):
    # the endpoint rule is not conservative on a map with full-rank velocity
    # gradient; the same override hook reports a residual well above rounding
    motion = ale.prescribed_map("map-a")
    geom = next(ale.interval_geometries(mesh, motion, "dc", 0.05, 1))
    _, div_end = geom.endpoint_flux()
    r = ale.scl_residual(mesh, geom, div_flux=div_end)
    assert np.abs(r).max() > 1e-10


def test_velocity_continuity_across_intervals(mesh):
    motion = ale.prescribed_map("map-b")
    geoms = list(ale.interval_geometries(mesh, motion, "c", 0.05, 6))
    for prev, cur in zip(geoms, geoms[1:]):
        np.testing.assert_allclose(cur.velocity.at(0.0), prev.velocity.end,
                                   rtol=0, atol=1e-14)


def test_identity_trajectory_is_inert(mesh):
    geom = next(ale.interval_geometries(mesh, ale.IdentityMap(), "dc", 0.1, 1))
    np.testing.assert_allclose(geom.J_at(0.05), 1.0, atol=0)
    assert np.all(geom.int_flux == 0.0)
    assert np.all(geom.div_int_flux == 0.0)


def test_tangling_detected_at_endpoint(mesh):
    # collapse the x axis only; a uniform flip of both axes keeps J positive
    u0 = np.zeros((mesh.n_nodes, 2))
    u1 = np.column_stack([-1.5 * mesh.nodes[:, 0], np.zeros(mesh.n_nodes)])
    vel = ale.velocity_piecewise_constant(u0, u1, 0.1)
    geom = ale.build_interval_geometry(mesh, u0, vel)
    with pytest.raises(ale.GridTanglingError):
        ale.assert_untangled(geom)


def test_tangling_detected_mid_interval(mesh):
    # endpoints untangled (zero net motion) but the interior of the loop
    # passes through an inverted state
    u = np.zeros((mesh.n_nodes, 2))
    v = np.column_stack([-100.0 * mesh.nodes[:, 0], np.zeros(mesh.n_nodes)])
    vel = ale.velocity_continuous(u, u, 0.1, w_prev_end=v)
    geom = ale.build_interval_geometry(mesh, u, vel)
    assert np.all(geom.J_at(0.0) > 0) and np.all(geom.J_at(0.1) > 0)
    with pytest.raises(ale.GridTanglingError):
        ale.assert_untangled(geom)
