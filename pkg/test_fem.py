"""
Tests du pas éléments finis : solution manufacturée, conditions aux limites,
projection des gradients et remontée des caractéristiques.
"""

import numpy as np

from src.fem import (
    FieldState,
    advance_conformation_field,
    assemble_load,
    assemble_momentum_operator,
    backtrack_feet,
    conformation_load,
    divergence_residual,
    interpolate_at_feet,
    interpolate_p1,
    interpolate_p2,
    nodal_velocity_gradient,
    solve_momentum_step,
    velocity_l2_error,
)
from src.mesh import build_rectangle, locate_points
from src.params import OSCILLATING_PARAMS, JsParams
from src.tensor_core import RR, RZ, AxiTensor, VelGrad, equilibrium_array, is_spd_batch, lyapunov_step

MMS_PARAMS = JsParams(Re=1.0, Wi=1.0, mu_s=0.5, xi=0.0)


def _exact_velocity(r, z):
    return -(r**2) * np.cos(z), 3.0 * r * np.sin(z)


def _mms_error(n: int) -> float:
    mesh = build_rectangle(0.5, 1.5, 0.0, 1.0, n, n)
    opr = assemble_momentum_operator(mesh, MMS_PARAMS, 1.0)
    mu_s, sigma = MMS_PARAMS.mu_s, opr.sigma

    def f_r(r, z):
        return sigma * (-(r**2) * np.cos(z)) - mu_s * (r**2 - 3.0) * np.cos(z) + z

    def f_z(r, z):
        return sigma * 3.0 * r * np.sin(z) - 3.0 * mu_s * np.sin(z) * (1.0 / r - r) + r

    rhs = assemble_load(opr, f_r, f_z)
    bc = np.zeros(opr.size)
    ur, uz = _exact_velocity(mesh.p2_nodes[:, 0], mesh.p2_nodes[:, 1])
    bc[: opr.n_u] = ur
    bc[opr.n_u: 2 * opr.n_u] = uz
    u, _ = opr.split(opr.solve(rhs, bc))
    return velocity_l2_error(opr, u, _exact_velocity)


class TestStokesOperator:
    def test_manufactured_solution_converges(self):
        e4, e8 = _mms_error(4), _mms_error(8)
        assert e8 < e4
        assert np.log2(e4 / e8) >= 2.0

    def test_zero_data_gives_zero_solution(self, coarse_sphere_mesh, newtonian_params):
        opr = assemble_momentum_operator(coarse_sphere_mesh, newtonian_params, 1e-3)
        state = FieldState.at_rest(coarse_sphere_mesh, newtonian_params)
        state.c[:] = 0.0
        u, p = solve_momentum_step(opr, state, state.u, 0.0, 0.0)
        assert np.all(u == 0.0) and np.all(p == 0.0)

    def test_uniform_stream_is_reproduced(self, unit_square_mesh, newtonian_params):
        opr = assemble_momentum_operator(unit_square_mesh, newtonian_params, 1e-3)
        state = FieldState.at_rest(unit_square_mesh, newtonian_params)
        u_foot = np.column_stack([np.zeros(opr.n_u), np.ones(opr.n_u)])
        u, p = solve_momentum_step(opr, state, u_foot, 0.0, 1.0)
        np.testing.assert_allclose(u[:, 0], 0.0, atol=1e-10)
        np.testing.assert_allclose(u[:, 1], 1.0, atol=1e-10)
        np.testing.assert_allclose(p, 0.0, atol=1e-8)

    def test_frame_acceleration_balanced_by_pressure(self, unit_square_mesh, newtonian_params):
        opr = assemble_momentum_operator(unit_square_mesh, newtonian_params, 1e-3)
        state = FieldState.at_rest(unit_square_mesh, newtonian_params)
        dU = 2.0
        u, p = solve_momentum_step(opr, state, state.u, dU, 0.0)
        np.testing.assert_allclose(u, 0.0, atol=1e-10)
        expected = newtonian_params.Re * dU * unit_square_mesh.vertices[:, 1]
        np.testing.assert_allclose(p, expected, atol=1e-8)

    def test_equilibrium_conformation_exerts_no_force(self, coarse_sphere_mesh):
        params = OSCILLATING_PARAMS
        opr = assemble_momentum_operator(coarse_sphere_mesh, params, 1e-3)
        state = FieldState.at_rest(coarse_sphere_mesh, params)
        u_eq, p_eq = solve_momentum_step(opr, state, state.u, 0.0, 1.0)
        state.c[:] = 0.0
        u_0, p_0 = solve_momentum_step(opr, state, state.u, 0.0, 1.0)
        np.testing.assert_allclose(u_eq, u_0, atol=1e-9)
        np.testing.assert_allclose(p_eq, p_0, atol=1e-7 * max(1.0, np.abs(p_0).max()))

    def test_equilibrium_load_vanishes_on_free_dofs(self, coarse_sphere_mesh, banding_params):
        opr = assemble_momentum_operator(coarse_sphere_mesh, banding_params, 1e-3)
        c = equilibrium_array(banding_params, coarse_sphere_mesh.n_vertices)
        f_r, f_z = conformation_load(opr, c)
        load = np.concatenate([f_r, f_z])
        free_velocity = opr.free[opr.free < 2 * opr.n_u]
        assert np.abs(load[free_velocity]).max() <= 1e-10 * max(1.0, np.abs(load).max())

    def test_solution_is_divergence_free(self, coarse_sphere_mesh, newtonian_params):
        opr = assemble_momentum_operator(coarse_sphere_mesh, newtonian_params, 1e-3)
        state = FieldState.at_rest(coarse_sphere_mesh, newtonian_params)
        u, _ = solve_momentum_step(opr, state, state.u, 0.0, 1.0)
        assert divergence_residual(opr, u) <= 1e-8 * max(1.0, np.abs(u).max())

    def test_boundary_conditions(self, coarse_sphere_mesh, newtonian_params):
        from src.mesh import BoundaryTag

        opr = assemble_momentum_operator(coarse_sphere_mesh, newtonian_params, 1e-3)
        state = FieldState.at_rest(coarse_sphere_mesh, newtonian_params)
        u, _ = solve_momentum_step(opr, state, state.u, 0.0, 0.7)
        sphere = coarse_sphere_mesh.tagged_p2_nodes(BoundaryTag.SPHERE)
        wall = coarse_sphere_mesh.tagged_p2_nodes(BoundaryTag.SIDEWALL)
        axis = coarse_sphere_mesh.tagged_p2_nodes(BoundaryTag.AXIS)
        np.testing.assert_array_equal(u[sphere], 0.0)
        np.testing.assert_array_equal(u[wall, 1], 0.7)
        np.testing.assert_array_equal(u[axis, 0], 0.0)

    def test_refactored_operator_gives_same_solution(self, unit_square_mesh, newtonian_params):
        opr = assemble_momentum_operator(unit_square_mesh, newtonian_params, 1e-3)
        state = FieldState.at_rest(unit_square_mesh, newtonian_params)
        a = solve_momentum_step(opr, state, state.u, 1.0, 0.5)[0]
        b = solve_momentum_step(opr.refactored(), state, state.u, 1.0, 0.5)[0]
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestGradients:
    def test_linear_field_gradient_is_exact(self, unit_square_mesh):
        opr = assemble_momentum_operator(unit_square_mesh, MMS_PARAMS, 1.0)
        r, z = unit_square_mesh.p2_nodes[:, 0], unit_square_mesh.p2_nodes[:, 1]
        u = np.column_stack([2.0 * r, 3.0 * r - 4.0 * z])
        L, hoop = nodal_velocity_gradient(opr, u)
        np.testing.assert_allclose(L[:, 0, 0], 2.0, atol=1e-12)
        np.testing.assert_allclose(L[:, 0, 1], 0.0, atol=1e-12)
        np.testing.assert_allclose(L[:, 1, 0], 3.0, atol=1e-12)
        np.testing.assert_allclose(L[:, 1, 1], -4.0, atol=1e-12)
        np.testing.assert_allclose(hoop, 2.0, atol=1e-12)


class TestCharacteristics:
    def test_quadratic_interpolation_is_exact(self, coarse_sphere_mesh):
        nodes = coarse_sphere_mesh.p2_nodes
        values = np.column_stack([nodes[:, 0] ** 2, nodes[:, 0] * nodes[:, 1]])
        rng = np.random.default_rng(3)
        points = np.column_stack([rng.uniform(1.5, 4.0, 50), rng.uniform(-3.5, 3.5, 50)])
        loc = locate_points(coarse_sphere_mesh, points)
        assert np.all(loc.inside)
        got = interpolate_p2(coarse_sphere_mesh, values, loc)
        np.testing.assert_allclose(got[:, 0], points[:, 0] ** 2, atol=1e-10)
        np.testing.assert_allclose(got[:, 1], points[:, 0] * points[:, 1], atol=1e-10)

    def test_zero_velocity_feet_are_nodes(self, coarse_sphere_mesh, newtonian_params):
        state = FieldState.at_rest(coarse_sphere_mesh, newtonian_params)
        feet = backtrack_feet(coarse_sphere_mesh, state.u, 1e-3)
        assert feet.n_outside == 0
        np.testing.assert_allclose(feet.points, coarse_sphere_mesh.p2_nodes, atol=1e-14)

    def test_translation_feet(self):
        mesh = build_rectangle(0.0, 1.0, 0.0, 1.0, 5, 5)
        h_t = 0.01
        u = np.column_stack([np.zeros(mesh.p2_nodes.shape[0]), np.ones(mesh.p2_nodes.shape[0])])
        feet = backtrack_feet(mesh, u, h_t)
        nodes = mesh.p2_nodes
        interior = nodes[:, 1] >= h_t
        np.testing.assert_allclose(feet.points[interior], nodes[interior] - [0.0, h_t], atol=1e-13)
        bottom = nodes[:, 1] == 0.0
        assert not np.any(feet.locations.inside[bottom])
        np.testing.assert_allclose(feet.points[bottom, 1], 0.0, atol=1e-14)

    def test_feet_interpolation_keeps_equilibrium(self, coarse_sphere_mesh, banding_params):
        state = FieldState.at_rest(coarse_sphere_mesh, banding_params)
        feet = backtrack_feet(coarse_sphere_mesh, state.u, 1e-3)
        u_foot, c_foot = interpolate_at_feet(coarse_sphere_mesh, state, feet)
        assert u_foot.shape == state.u.shape
        np.testing.assert_allclose(c_foot, state.c, rtol=1e-13)

    def test_rigid_rotation_feet_third_order(self):
        mesh = build_rectangle(0.5, 1.5, 0.0, 1.0, 8, 8)
        centre = np.array([1.0, 0.5])
        X = mesh.p2_nodes - centre
        radius = np.hypot(X[:, 0], X[:, 1])
        disk = radius <= 0.4
        u = np.column_stack([-X[:, 1], X[:, 0]])

        errors = []
        for h_t in (0.05, 0.025):
            feet = backtrack_feet(mesh, u, h_t)
            cos, sin = np.cos(h_t), np.sin(h_t)
            exact = centre + np.column_stack([cos * X[:, 0] + sin * X[:, 1], -sin * X[:, 0] + cos * X[:, 1]])
            assert np.all(feet.locations.inside[disk])
            err = np.hypot(*(feet.points[disk] - exact[disk]).T).max()
            assert err <= 1.1 * radius[disk].max() * h_t**3 / 6.0
            errors.append(err)
        assert 7.5 <= errors[0] / errors[1] <= 8.5

    def test_p1_interpolation_keeps_spd(self, coarse_sphere_mesh):
        rng = np.random.default_rng(5)
        n = coarse_sphere_mesh.n_vertices
        low = 10.0 ** rng.uniform(-2.0, 1.0, n)
        high = low * 10.0 ** rng.uniform(0.0, 4.0, n)
        angle = rng.uniform(0.0, np.pi, n)
        c = np.column_stack([
            high * np.cos(angle) ** 2 + low * np.sin(angle) ** 2,
            (high - low) * np.cos(angle) * np.sin(angle),
            high * np.sin(angle) ** 2 + low * np.cos(angle) ** 2,
            10.0 ** rng.uniform(-2.0, 1.0, n),
        ])
        assert np.all(is_spd_batch(c))
        points = np.column_stack([rng.uniform(0.0, 4.115, 5000), rng.uniform(-4.0, 4.0, 5000)])
        values = interpolate_p1(coarse_sphere_mesh, c, locate_points(coarse_sphere_mesh, points))
        assert np.all(is_spd_batch(values))


class TestConformationAdvance:
    def test_uniform_shear_matches_pointwise_step(self, unit_square_mesh):
        params, h_t, kappa = OSCILLATING_PARAMS, 1e-2, 1.3
        opr = assemble_momentum_operator(unit_square_mesh, params, h_t)
        r = unit_square_mesh.p2_nodes[:, 0]
        u = np.column_stack([np.zeros_like(r), kappa * r])
        rng = np.random.default_rng(9)
        c_foot = equilibrium_array(params, unit_square_mesh.n_vertices)
        c_foot[:, RZ] = rng.uniform(-0.5, 0.5, unit_square_mesh.n_vertices) * c_foot[:, RR]
        c_new = advance_conformation_field(opr, c_foot, u, params, h_t)
        grad = VelGrad(np.array([[0.0, 0.0], [kappa, 0.0]]))
        for i in range(unit_square_mesh.n_vertices):
            expected = lyapunov_step(AxiTensor.from_array(c_foot[i]), grad, params, h_t).as_array()
            np.testing.assert_allclose(c_new[i], expected, rtol=1e-8, atol=1e-8)


def test_operator_dimensions(newtonian_params):
    mesh = build_rectangle(0.5, 1.5, 0.0, 1.0, 2, 2)
    opr = assemble_momentum_operator(mesh, newtonian_params, 1e-3)
    assert opr.size == 2 * opr.n_u + opr.n_p
    assert opr.dirichlet.size < opr.size
