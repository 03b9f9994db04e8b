import math
import unittest

import numpy as np
import pytest
from pydantic import ValidationError

from qfode import pde_models as pm
from qfode import taylor_ode as tode
from qfode.errors import ConfigurationError
from qfode.fourier_quadrature import FourierExtension, QuadratureConfig
from qfode.pde_models import GridField, Mesh2D


class TestMesh(unittest.TestCase):
    def test_spacing(self):
        mesh = Mesh2D.square(41)
        self.assertAlmostEqual(mesh.dx, 1 / 40)
        self.assertAlmostEqual(mesh.dy, 1 / 40)
        x, y = mesh.coordinates()
        self.assertEqual(x.shape, (41, 41))
        self.assertAlmostEqual(y[1, 0], mesh.dy)

    def test_rectangular_domain(self):
        mesh = Mesh2D(nx=5, ny=3, x_min=-1.0, x_max=1.0)
        self.assertAlmostEqual(mesh.dx, 0.5)
        self.assertAlmostEqual(mesh.dy, 0.5)
        self.assertEqual(int(mesh.boundary_mask().sum()), 5 * 3 - 3)

    def test_validation(self):
        with self.assertRaises(ValidationError):
            Mesh2D(nx=2, ny=5)
        with self.assertRaises(ValidationError):
            Mesh2D(nx=5, ny=5, x_min=1.0, x_max=0.0)


class TestGridField(unittest.TestCase):
    def test_shape_against_mesh(self):
        mesh = Mesh2D.square(5)
        field = GridField(("u", "v"), np.zeros((2, 5, 5)), mesh)
        self.assertEqual(field.values.shape, (2, 25))
        self.assertEqual(field.component("v").shape, (5, 5))
        with self.assertRaises(ValueError):
            GridField(("u",), np.zeros(24), mesh)
        with self.assertRaises(KeyError):
            field.component("w")

    def test_copy_is_independent(self):
        field = GridField(("u",), np.ones(9), Mesh2D.square(3))
        clone = field.copy()
        clone.values[0, 0] = 5.0
        self.assertEqual(field.values[0, 0], 1.0)


class TestHeatModel(unittest.TestCase):
    def setUp(self):
        self.mesh = Mesh2D.square(11)
        self.model = pm.build_heat_model(self.mesh)

    def test_flat_patch_has_zero_rate(self):
        values = np.ones(self.model.state_shape)
        values[:, self.model.boundary_mask] = 0.0
        self.assertEqual(self.model.rhs(values)[0, 5, 5], 0.0)

    def test_initial_condition_at_centre(self):
        self.assertAlmostEqual(self.model.initial_values()[0, 5, 5], 1.0, places=15)
        field = self.model.initial_condition()
        self.assertEqual(field.components, ("u",))

    def test_exact_solution_at_centre(self):
        expected = math.exp(-2 * math.pi ** 2 * 0.07)
        self.assertAlmostEqual(self.model.exact_solution(0.07)[0, 5, 5], expected, places=14)
        self.assertAlmostEqual(expected, 0.2511, delta=1e-3)

    def test_boundaries_pinned_to_zero(self):
        field = self.model.to_field(np.full(self.model.state_shape, 3.0))
        fixed = pm.apply_bcs(field, self.model, 0.5)
        self.assertTrue(np.all(fixed.grid[:, self.model.boundary_mask] == 0.0))
        self.assertTrue(np.all(fixed.grid[:, 1:-1, 1:-1] == 3.0))

    def test_boundary_nodes_have_zero_rate(self):
        rng = np.random.default_rng(0)
        rate = self.model.rhs(rng.normal(size=self.model.state_shape))
        self.assertTrue(np.all(rate[:, self.model.boundary_mask] == 0.0))

    def test_rejects_bad_parameters(self):
        with self.assertRaises(ValueError):
            pm.build_heat_model(self.mesh, alpha_sq=0.0)
        with self.assertRaises(ValueError):
            pm.build_heat_model(self.mesh, cfl_number=1.0)


def test_heat_cfl_scale():
    model = pm.build_heat_model(Mesh2D.square(41))
    field = model.initial_condition()
    assert pm.cfl_time_scale(field, model) == pytest.approx(1.25e-4)

    coarse = pm.build_heat_model(Mesh2D.square(21))
    assert pm.cfl_time_scale(coarse.initial_condition(), coarse) == pytest.approx(4 * 1.25e-4)


def test_heat_truncation_error_is_second_order():
    sizes = [21, 41, 81, 161]
    spacings, residuals = [], []
    for points in sizes:
        model = pm.build_heat_model(Mesh2D.square(points))
        exact = model.exact_solution(0.0)
        rate = model.rhs(exact)
        residual = np.abs(rate - (-2 * math.pi ** 2) * exact)[:, 1:-1, 1:-1]
        spacings.append(model.mesh.dx)
        residuals.append(float(residual.max()))
    slope = np.polyfit(np.log(spacings), np.log(residuals), 1)[0]
    assert abs(slope - 2) <= 0.2


def test_heat_solution_stays_bounded_and_symmetric():
    model = pm.build_heat_model(Mesh2D.square(11))
    quad = QuadratureConfig(extension=FourierExtension.PERIODIC)
    dt_cfl = model.cfl_time_scale(model.initial_values())
    partition = tode.select_partition(0.05, dt_cfl, 0.1, 4)
    trajectory = tode.solve(model, partition, 10, quad)
    for values in trajectory.values:
        assert values.min() >= 0.0
        assert values.max() <= 1.0
        np.testing.assert_allclose(values[0], values[0].T, atol=1e-10)


class TestBurgersModel(unittest.TestCase):
    def setUp(self):
        self.model = pm.build_burgers_model(Mesh2D.square(11), nu=0.01)

    def test_exact_at_origin(self):
        self.assertAlmostEqual(self.model.exact_solution(0.0)[0, 0, 0], 0.5)

    def test_corner_boundary_value(self):
        field = pm.apply_bcs(self.model.to_field(np.zeros(self.model.state_shape)),
                             self.model, 0.0)
        self.assertAlmostEqual(field.grid[0, 0, 0], 0.5)

    def test_uniform_field_is_steady(self):
        rate = self.model.rhs(np.full(self.model.state_shape, 0.37))
        np.testing.assert_allclose(rate, 0.0, atol=1e-12)

    def test_sigmoid_limits(self):
        self.assertLess(self.model.exact_solution(0.0)[0, -1, -1], 1e-6)
        self.assertGreater(self.model.exact_solution(10.0)[0, 0, 0], 1 - 1e-6)

    def test_viscosity_must_be_positive(self):
        with self.assertRaises(ValueError):
            pm.build_burgers_model(Mesh2D.square(11), nu=0.0)


def test_burgers_cfl_takes_the_smaller_scale():
    model = pm.build_burgers_model(Mesh2D.square(101), nu=0.01)
    assert model.cfl_time_scale(np.ones(model.state_shape)) == pytest.approx(2e-3)

    slow = pm.build_burgers_model(Mesh2D.square(101), nu=1e-4)
    assert slow.cfl_time_scale(np.ones(slow.state_shape)) == pytest.approx(8e-3)
    # no velocity: diffusive scale only
    assert slow.cfl_time_scale(np.zeros(slow.state_shape)) == pytest.approx(
        0.8 * 0.01 ** 2 / (4 * 1e-4))


def test_burgers_solution_stays_in_exact_range():
    model = pm.build_burgers_model(Mesh2D.square(11), nu=0.01)
    quad = QuadratureConfig(extension=FourierExtension.PERIODIC)
    dt_cfl = model.cfl_time_scale(model.initial_values())
    partition = tode.select_partition(0.1, dt_cfl, 0.1, 4)
    final = tode.solve(model, partition, 10, quad).final
    assert final.min() >= -1e-6
    assert final.max() <= 1 + 1e-6


class TestCoupledModel(unittest.TestCase):
    def setUp(self):
        self.model = pm.build_coupled_model(Mesh2D.square(11), nu=0.01)

    def test_components_sum_to_three_halves(self):
        exact = self.model.exact_solution(0.3)
        np.testing.assert_allclose(exact[0] + exact[1], 1.5, atol=1e-14)

    def test_values_on_the_front(self):
        exact = self.model.exact_solution(0.0)
        # x == y on the diagonal
        self.assertAlmostEqual(exact[0, 4, 4], 0.625)
        self.assertAlmostEqual(exact[1, 4, 4], 0.875)

    def test_uniform_field_is_steady(self):
        values = np.stack([np.full((11, 11), 0.6), np.full((11, 11), 0.9)])
        np.testing.assert_allclose(self.model.rhs(values), 0.0, atol=1e-12)

    def test_components(self):
        self.assertEqual(self.model.components, ("u", "v"))
        self.assertEqual(self.model.state_shape, (2, 11, 11))


def test_coupled_solution_keeps_component_sum(zero_padded_quad):
    model = pm.build_coupled_model(Mesh2D.square(11), nu=0.01)
    dt_cfl = model.cfl_time_scale(model.initial_values())
    partition = tode.select_partition(0.1, dt_cfl, 0.1, 4)
    final = tode.solve(model, partition, 10, zero_padded_quad).final
    np.testing.assert_allclose(final[0, 5, :] + final[1, 5, :], 1.5, atol=2e-2)
    np.testing.assert_allclose(final[0, :, 5] + final[1, :, 5], 1.5, atol=2e-2)


class TestCavityModel(unittest.TestCase):
    def setUp(self):
        self.mesh = Mesh2D.square(11)
        self.model = pm.build_cavity_model(self.mesh, re=100.0)

    def test_requires_square_spacing(self):
        with self.assertRaises(ValueError):
            pm.build_cavity_model(Mesh2D(nx=11, ny=21))

    def test_quiescent_fixed_point(self):
        model = pm.build_cavity_model(self.mesh, lid_speed=0.0)
        rest = model.apply_bcs(np.zeros(model.state_shape), 0.0)
        np.testing.assert_array_equal(rest, 0.0)
        np.testing.assert_array_equal(model.rhs(rest), 0.0)

    def test_lid_vorticity_with_zero_stream_function(self):
        values = self.model.initial_values()
        h = self.model.h
        np.testing.assert_allclose(values[0, -1, :], -2 / h)
        np.testing.assert_allclose(values[0, 0, :], 0.0)
        self.assertAlmostEqual(-2 / h, -20.0)

    def test_stream_function_zero_on_walls(self):
        rng = np.random.default_rng(1)
        fixed = pm.apply_bcs(self.model.to_field(rng.normal(size=self.model.state_shape)),
                             self.model, 0.0)
        psi = fixed.component("psi")
        self.assertTrue(np.all(psi[self.model.boundary_mask] == 0.0))

    def test_poisson_fixed_point(self):
        rng = np.random.default_rng(2)
        psi = np.zeros((11, 11))
        psi[1:-1, 1:-1] = rng.normal(size=(9, 9))
        omega = rng.normal(size=(11, 11))
        omega[1:-1, 1:-1] = -pm.laplacian(psi, self.model.h, self.model.h)
        values = np.stack([omega, psi])
        rate = self.model.rhs(values)
        np.testing.assert_allclose(rate[1], 0.0, atol=1e-12)
        self.assertLess(self.model.poisson_residual(values), 1e-10)

    def test_wall_velocities(self):
        u, v = self.model.velocities(self.model.initial_values())
        np.testing.assert_array_equal(u[-1, :], 1.0)
        np.testing.assert_array_equal(u[0, :], 0.0)
        np.testing.assert_array_equal(v, 0.0)

    def test_cfl_scale_is_positive(self):
        dt = pm.cfl_time_scale(self.model.initial_condition(), self.model)
        self.assertGreater(dt, 0.0)
        self.assertLessEqual(dt, 0.8 * self.model.h)


def test_polynomial_ode_model():
    model = pm.build_polynomial_ode(c0=1.0, c1=-2.0, c2=0.5, y0=[1.0, 2.0])
    assert model.state_shape == (1, 2)
    assert model.coupling_degree == 2
    np.testing.assert_allclose(model.rhs(model.initial_values()), [[-0.5, -1.0]])
    assert math.isinf(pm.build_polynomial_ode(y0=[1.0]).cfl_time_scale(np.ones((1, 1))))


def test_cfl_time_scale_rejects_non_finite_fields(small_mesh):
    model = pm.build_heat_model(small_mesh)
    values = model.initial_values()
    values[0, 3, 3] = np.nan
    with pytest.raises(ValueError):
        pm.cfl_time_scale(model.to_field(values), model)


def test_cfl_time_scale_needs_a_usable_scale(mocker, small_mesh):
    model = pm.build_heat_model(small_mesh)
    mocker.patch.object(model, "cfl_time_scale", return_value=0.0)
    with pytest.raises(ConfigurationError):
        pm.cfl_time_scale(model.initial_condition(), model)
