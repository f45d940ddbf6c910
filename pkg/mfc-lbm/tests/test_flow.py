from unittest import TestCase

import numpy as np
import pytest

from mfc_lbm.exceptions import InputError, NumericalBlowupError, PercolationError
from mfc_lbm.grid import load_geometry, make_channel
from mfc_lbm.lbm_model.d2q9 import D2Q9, BounceBackLinks, equilibrium, moments, stream
from mfc_lbm.lbm_model.flow import (
    FlowParameters,
    FlowState,
    apply_bounce_back,
    collide_and_stream,
    column_mass_flux,
    macroscopic,
    run_to_steady,
    step,
)
from mfc_lbm.types_for_mfc import CellKind
from tests.utility import periodic_box, perturbed_flow_state, small_lattice


class TestD2Q9(TestCase):
    def test_velocity_set(self):
        self.assertAlmostEqual(D2Q9.weights.sum(), 1.0)
        for i in range(9):
            with self.subTest(direction=i):
                np.testing.assert_array_equal(
                    D2Q9.velocities[D2Q9.opposite[i]], -D2Q9.velocities[i]
                )

    def test_equilibrium_moments(self):
        rng = np.random.default_rng(2)
        rho = 1 + 0.1 * rng.random((4, 5))
        ux = 0.05 * rng.standard_normal((4, 5))
        uy = 0.05 * rng.standard_normal((4, 5))
        density, jx, jy = moments(equilibrium(rho, ux, uy))
        np.testing.assert_allclose(density, rho, rtol=1e-14)
        np.testing.assert_allclose(jx, rho * ux, atol=1e-15)
        np.testing.assert_allclose(jy, rho * uy, atol=1e-15)

    def test_stream_directions(self):
        f = np.zeros((9, 5, 5))
        f[:, 2, 2] = 1.0
        streamed = stream(f)
        for i, (cx, cy) in enumerate(D2Q9.velocities):
            with self.subTest(direction=i):
                self.assertEqual(streamed[i, 2 + cy, 2 + cx], 1.0)
                self.assertEqual(streamed[i].sum(), 1.0)

    def test_bounce_back_links(self):
        lattice = load_geometry("WWWWW\nI...O\nI.#.O\nI...O\nWWWWW\n")
        links = BounceBackLinks(lattice.flow_obstacles)
        # The cell west of the solid has an eastward link into it
        self.assertTrue(links.masks[1][2, 1])
        self.assertTrue(links.arrived_by_bounce(3)[2, 1])
        self.assertFalse(links.masks[1][1, 1])


class TestFlowSolver(TestCase):
    def test_parameters(self):
        self.assertAlmostEqual(FlowParameters(tau=0.8).viscosity, 0.1)
        for kwargs in [{"tau": 0.5}, {"tau": 0.4}, {"inlet_velocity": 0.2}]:
            with self.subTest(**kwargs):
                with self.assertRaises(InputError):
                    FlowParameters(**kwargs)

    def test_closed_box_mass_conservation(self):
        lattice = periodic_box(height=12, width=16, n_solids=20, seed=1)
        params = FlowParameters(tau=0.8)
        state = perturbed_flow_state(lattice, params.tau, seed=3)
        links = BounceBackLinks(lattice.flow_obstacles)
        initial_mass = state.total_mass
        for _ in range(1000):
            state = step(state, lattice, params, links)
        self.assertAlmostEqual(state.total_mass / initial_mass, 1.0, delta=1e-10)
        self.assertEqual(state.f[:, lattice.flow_obstacles].sum(), 0.0)

    def test_rest_state_is_steady(self):
        lattice = periodic_box(height=8, width=8, n_solids=6, seed=2)
        params = FlowParameters(tau=0.7)
        state = FlowState.at_rest(lattice, params.tau)
        for _ in range(50):
            state = step(state, lattice, params)
        rho, ux, uy = macroscopic(state, lattice)
        np.testing.assert_allclose(ux, 0.0, atol=1e-15)
        np.testing.assert_allclose(uy, 0.0, atol=1e-15)
        np.testing.assert_allclose(rho[~lattice.flow_obstacles], 1.0, rtol=1e-14)

    def test_bounce_back_needs_post_collision(self):
        lattice = make_channel(length=5, width=3)
        with self.assertRaises(InputError):
            apply_bounce_back(FlowState.at_rest(lattice, 0.8), lattice)
        streamed = collide_and_stream(FlowState.at_rest(lattice, 0.8), lattice)
        self.assertIsNotNone(streamed.post_collision)
        bounced = apply_bounce_back(streamed, lattice)
        # North-going populations next to the south wall come back from the wall
        self.assertAlmostEqual(bounced.f[2, 1, 2], streamed.post_collision[4, 1, 2])

    def test_fused_step_matches_stream_then_bounce(self):
        lattice = periodic_box(height=10, width=12, n_solids=15, seed=4)
        params = FlowParameters(tau=0.6706)
        state = perturbed_flow_state(lattice, params.tau, seed=5)
        links = BounceBackLinks(lattice.flow_obstacles)
        fused = step(state, lattice, params, links)
        staged = apply_bounce_back(collide_and_stream(state, lattice), lattice, links)
        np.testing.assert_array_equal(fused.f, staged.f)

    def test_density_is_anchored_at_the_outlet(self):
        lattice = small_lattice()
        params = FlowParameters(tau=0.6706, inlet_velocity=0.005, tolerance=1e-10)
        field = run_to_steady(lattice, params)
        outlet = lattice.is_kind(CellKind.OUTLET)
        np.testing.assert_allclose(field.rho[outlet], 1.0, rtol=1e-12)
        open_cells = ~lattice.flow_obstacles
        mean_rho = field.rho[open_cells].mean()
        self.assertAlmostEqual(mean_rho, 1.0, delta=1e-2)
        links = BounceBackLinks(lattice.flow_obstacles)
        state = field.state
        for _ in range(5000):
            state = step(state, lattice, params, links)
        rho, _, _ = macroscopic(state, lattice)
        self.assertAlmostEqual(rho[open_cells].mean(), mean_rho, delta=1e-8)
        flux = column_mass_flux(state, lattice)
        np.testing.assert_allclose(flux, flux.mean(), rtol=1e-6)

    def test_blowup(self):
        lattice = make_channel(length=5, width=3)
        state = FlowState.at_rest(lattice, 0.8)
        state.f[:, 2, 2] = -state.f[:, 2, 2]
        with self.assertRaises(NumericalBlowupError) as context:
            macroscopic(state, lattice)
        self.assertEqual(context.exception.cell, (2, 2))

    def test_not_percolating(self):
        lattice = load_geometry("WWWWW\nI.#.O\nI.#.O\nWWWWW\n")
        with self.assertRaises(PercolationError):
            run_to_steady(lattice, FlowParameters())

    def test_channel_flow_through_ports(self):
        lattice = make_channel(length=24, width=6)
        params = FlowParameters(tau=0.8, inlet_velocity=0.01, tolerance=1e-9)
        field = run_to_steady(lattice, params)
        self.assertLess(field.convergence.residual, 1e-9)
        # Steady state: the same mass crosses every interior face
        flux = column_mass_flux(field.state, lattice)
        np.testing.assert_allclose(flux, flux.mean(), rtol=1e-3)
        self.assertGreater(flux.mean(), 0.0)
        np.testing.assert_allclose(field.rho[1:-1, -1], 1.0, rtol=1e-12)
        # No-slip: the flow is fastest in the middle of the channel
        profile = field.ux[1:-1, lattice.width // 2]
        self.assertIn(int(np.argmax(profile)), (2, 3))
        self.assertTrue(np.all(field.ux[0] == 0.0) and np.all(field.ux[-1] == 0.0))

    def test_warm_start_after_obstacle_change(self):
        lattice = make_channel(length=16, width=6)
        params = FlowParameters(tau=0.8, inlet_velocity=0.01, tolerance=1e-8)
        cold = run_to_steady(lattice, params)
        blocked = load_geometry(
            "WWWWWWWWWWWWWWWW\n"
            "I..............O\n"
            "I..............O\n"
            "I......B.......O\n"
            "I......B.......O\n"
            "I..............O\n"
            "I..............O\n"
            "WWWWWWWWWWWWWWWW\n"
        )
        warm = run_to_steady(blocked, params, initial=cold.state)
        self.assertTrue(np.all(warm.state.f[:, 3:5, 7] == 0.0))
        self.assertEqual(warm.ux[3, 7], 0.0)


def test_equilibrium_is_scalar_friendly():
    f = equilibrium(1.0, 0.0, 0.0)
    assert f.shape == (9,)
    assert f.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(f, D2Q9.weights)
