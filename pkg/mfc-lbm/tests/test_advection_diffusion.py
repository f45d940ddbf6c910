from unittest import TestCase

import numpy as np
import pytest

from mfc_lbm.exceptions import InputError, InstabilityError
from mfc_lbm.grid import load_geometry, make_channel
from mfc_lbm.lbm_model.advection_diffusion import (
    AdeParameters,
    Advection,
    ScalarState,
    ade_step,
    concentration_variance,
    run_to_steady_ade,
)
from mfc_lbm.lbm_model.d2q9 import D2Q9, BounceBackLinks
from mfc_lbm.lbm_model.flow import FlowParameters, run_to_steady
from mfc_lbm.types_for_mfc import CellKind
from tests.utility import periodic_box, small_lattice


def _at_rest(lattice):
    return Advection.at_rest(lattice.shape)


def _porous_flow_advection(lattice, flow_to_ade_factor=10.0):
    params = FlowParameters(tau=0.6706, inlet_velocity=0.005, tolerance=1e-10)
    flow = run_to_steady(lattice, params)
    return Advection.from_flow(lattice, flow.state, flow_to_ade_factor)


class TestAdvectionDiffusion(TestCase):
    def test_parameters(self):
        self.assertAlmostEqual(AdeParameters(tau_d=0.8).diffusivity, 0.1)
        for kwargs in [
            {"tau_d": 0.5},
            {"inlet_concentration": -1.0},
            {"dt_s": 0.0},
            {"overshoot_tolerance": 0.0},
        ]:
            with self.subTest(**kwargs):
                with self.assertRaises(InputError):
                    AdeParameters(**kwargs)

    def test_closed_box_mass_conservation(self):
        lattice = periodic_box(height=12, width=16, n_solids=20, seed=5)
        rng = np.random.default_rng(1)
        params = AdeParameters(tau_d=1.0, inlet_concentration=0.0)
        state = ScalarState.from_concentration(
            lattice, 1.0 + rng.random(lattice.shape), params.tau_d
        )
        links = BounceBackLinks(lattice.scalar_obstacles)
        initial_mass = state.total_mass
        for _ in range(1000):
            state = ade_step(state, lattice, _at_rest(lattice), None, params, links)
        self.assertAlmostEqual(state.total_mass / initial_mass, 1.0, delta=1e-10)
        self.assertEqual(state.concentration[lattice.scalar_obstacles].sum(), 0.0)

    def test_uniform_field_is_steady(self):
        lattice = load_geometry("WWWWWW\nI.#..O\nI..B.O\nI....O\nWWWWWW\n")
        params = AdeParameters(tau_d=0.9, inlet_concentration=410.0)
        state = ScalarState.uniform(lattice, 410.0, params.tau_d)
        for _ in range(20):
            state = ade_step(state, lattice, _at_rest(lattice), None, params)
        open_cells = ~lattice.scalar_obstacles
        np.testing.assert_allclose(state.concentration[open_cells], 410.0, rtol=1e-12)

    def test_dirichlet_inlet_fills_channel(self):
        lattice = make_channel(length=12, width=4)
        params = AdeParameters(tau_d=1.0, inlet_concentration=100.0, tolerance=1e-9)
        empty = ScalarState.from_concentration(lattice, np.zeros(lattice.shape), params.tau_d)
        field = run_to_steady_ade(lattice, _at_rest(lattice), None, params, initial=empty)
        interior = field.concentration[1:-1, :]
        np.testing.assert_allclose(interior, 100.0, rtol=1e-3)

    def test_sink_depletes_biofilm_cell(self):
        lattice = load_geometry("WWWWWW\nI....O\nI..B.O\nI....O\nWWWWWW\n")
        params = AdeParameters(tau_d=1.0, inlet_concentration=100.0, tolerance=1e-9)
        sink = np.zeros(lattice.shape)
        sink[2, 3] = 0.5
        no_sink = run_to_steady_ade(lattice, _at_rest(lattice), None, params)
        with_sink = run_to_steady_ade(lattice, _at_rest(lattice), sink, params)
        self.assertLess(with_sink.concentration[2, 3], no_sink.concentration[2, 3])
        self.assertTrue(np.all(with_sink.concentration >= 0.0))

    def test_invalid_sink(self):
        lattice = load_geometry("WWWWWW\nI....O\nI..B.O\nI....O\nWWWWWW\n")
        params = AdeParameters(tau_d=1.0)
        state = ScalarState.uniform(lattice, 1.0, params.tau_d)
        outside = np.zeros(lattice.shape)
        outside[1, 1] = 0.1
        negative = np.zeros(lattice.shape)
        negative[2, 3] = -0.1
        for name, sink in [
            ("outside biofilm", outside),
            ("negative", negative),
            ("shape", np.zeros((2, 2))),
        ]:
            with self.subTest(sink=name):
                with self.assertRaises(InputError):
                    ade_step(state, lattice, _at_rest(lattice), sink, params)

    def test_negative_concentration_is_unstable(self):
        lattice = periodic_box(height=6, width=6)
        params = AdeParameters(tau_d=1.0, inlet_concentration=0.0)
        concentration = np.zeros(lattice.shape)
        concentration[3, 3] = -1.0
        state = ScalarState.from_concentration(lattice, concentration, params.tau_d)
        with self.assertRaises(InstabilityError) as context:
            ade_step(state, lattice, _at_rest(lattice), None, params)
        self.assertIsNotNone(context.exception.cell)

    def test_advection_from_velocity(self):
        lattice = load_geometry("WWWWW\nI.#BO\nI...O\nWWWWW\n")
        advection = Advection.from_velocity(
            lattice, np.full(lattice.shape, 0.02), np.full(lattice.shape, -0.004)
        )
        ux, uy = advection.velocity
        np.testing.assert_allclose(advection.weights.sum(axis=0), 1.0, rtol=1e-14)
        self.assertAlmostEqual(ux[2, 2], 0.02)
        self.assertAlmostEqual(uy[2, 2], -0.004)
        for cell in [(1, 2), (1, 3), (0, 1)]:
            with self.subTest(cell=cell):
                np.testing.assert_allclose(advection.weights[:, cell[0], cell[1]], D2Q9.weights)

    def test_excessive_advection_is_unstable(self):
        lattice = make_channel(length=6, width=3)
        with self.assertRaises(InstabilityError):
            Advection.from_velocity(lattice, np.full(lattice.shape, 0.9), np.zeros(lattice.shape))

    def test_overshoot_is_unstable(self):
        lattice = periodic_box(height=8, width=6)
        advection = Advection.from_velocity(
            lattice, np.zeros(lattice.shape), np.full(lattice.shape, -0.05)
        )
        params = AdeParameters(tau_d=0.6, inlet_concentration=0.0, max_steps=5000)
        initial = ScalarState.uniform(lattice, 10.0, params.tau_d)
        with self.assertRaises(InstabilityError) as context:
            run_to_steady_ade(lattice, advection, None, params, initial=initial)
        self.assertIn("overshooting", str(context.exception))


class TestFlowAdvection(TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.lattice = small_lattice()
        cls.advection = _porous_flow_advection(cls.lattice)

    def test_weights_are_antisymmetric_across_links(self):
        lattice = self.lattice
        advective = self.advection.weights - D2Q9.weights.reshape(-1, 1, 1)
        open_cells = ~lattice.flow_obstacles
        np.testing.assert_allclose(self.advection.weights.sum(axis=0), 1.0, atol=1e-14)
        np.testing.assert_array_equal(advective[:, ~open_cells], 0.0)
        interior = np.zeros(lattice.shape, dtype=bool)
        interior[:, 1:-1] = True
        for i, (cx, cy) in enumerate(D2Q9.velocities[1:], start=1):
            with self.subTest(direction=i):
                ahead = np.roll(advective[D2Q9.opposite[i]], shift=(-cy, -cx), axis=(0, 1))
                linked = open_cells & np.roll(open_cells, shift=(-cy, -cx), axis=(0, 1)) & interior
                np.testing.assert_allclose(
                    advective[i][linked], -ahead[linked], rtol=0, atol=1e-15
                )

    def test_flow_carries_the_scalar_downstream(self):
        ux, _ = self.advection.velocity
        fluid = self.lattice.is_kind(CellKind.FLUID)
        self.assertGreater(ux[fluid].mean(), 0.0)
        self.assertLess(np.abs(ux).max(), 0.3)

    def test_uniform_inflow_stays_uniform(self):
        open_cells = ~self.lattice.scalar_obstacles
        for tau_d in [1.0, 0.5036]:
            with self.subTest(tau_d=tau_d):
                params = AdeParameters(tau_d=tau_d, inlet_concentration=410.0, tolerance=1e-10)
                field = run_to_steady_ade(self.lattice, self.advection, None, params)
                np.testing.assert_allclose(field.concentration[open_cells], 410.0, rtol=1e-6)


def test_concentration_variance():
    concentration = np.zeros((5, 7))
    concentration[2, 1] = 1.0
    concentration[2, 5] = 1.0
    var_x, var_y = concentration_variance(concentration)
    assert var_x == pytest.approx(4.0)
    assert var_y == pytest.approx(0.0)


def test_pulse_spreads_symmetrically(subtests):
    lattice = periodic_box(height=23, width=21)
    for tau_d in [0.5036, 1.0, 1.5]:
        with subtests.test(tau_d=tau_d):
            params = AdeParameters(
                tau_d=tau_d,
                inlet_concentration=0.0,
                negative_tolerance=None,
                overshoot_tolerance=None,
            )
            concentration = np.zeros(lattice.shape)
            concentration[11, 10] = 1.0
            state = ScalarState.from_concentration(lattice, concentration, tau_d)
            for _ in range(10):
                state = ade_step(state, lattice, _at_rest(lattice), None, params)
            assert state.total_mass == pytest.approx(1.0, rel=1e-12)
            if tau_d == 1.0:
                assert np.all(state.concentration >= 0.0)
            np.testing.assert_allclose(
                state.concentration, state.concentration[:, ::-1], atol=1e-15
            )
