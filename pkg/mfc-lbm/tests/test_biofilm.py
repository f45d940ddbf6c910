from unittest import TestCase

import numpy as np
import pytest

from mfc_lbm.biofilm import (
    BiofilmParameters,
    BiofilmState,
    attach,
    grow,
    spread,
    total_biomass,
    total_mediator,
)
from mfc_lbm.electrochem import ElectroParams, monod_rate
from mfc_lbm.exceptions import BiofilmClogError, InputError
from mfc_lbm.grid import interface_cells, load_geometry, make_channel
from mfc_lbm.types_for_mfc import CellKind
from tests.utility import biofilm_block

ISLAND = "WWWWW\nI...O\nI.#.O\nI...O\nWWWWW\n"


def _state_from(lattice, values):
    state = BiofilmState.empty(lattice.shape)
    for cell, (concentration, m_ox) in values.items():
        state.concentration[cell] = concentration
        state.m_ox[cell] = m_ox
    return state


class TestBiofilmParameters(TestCase):
    def test_defaults(self):
        params = BiofilmParameters()
        self.assertEqual(params.attachment_cells, 200)
        self.assertEqual(params.initial_concentration, 450.0)
        self.assertEqual(params.max_concentration, 512.5)

    def test_invalid_values(self):
        for kwargs in [
            {"attachment_cells": -1},
            {"attachment_cells": 1.5},
            {"initial_concentration": 0.0},
            {"spread_fraction": 0.0},
            {"spread_fraction": 1.0},
            {"growth_yield": -0.1},
        ]:
            with self.subTest(**kwargs):
                with self.assertRaises(InputError):
                    BiofilmParameters(**kwargs)

    def test_state_shapes(self):
        with self.assertRaises(InputError):
            BiofilmState(concentration=np.zeros((2, 2)), m_ox=np.zeros((2, 3)))


class TestAttachment(TestCase):
    def setUp(self) -> None:
        self.lattice = load_geometry(ISLAND)
        self.state = BiofilmState.empty(self.lattice.shape)
        self.m_total = ElectroParams().m_total

    def test_whole_front_is_colonised(self):
        params = BiofilmParameters(attachment_cells=10)
        front = interface_cells(self.lattice)
        lattice, state = attach(
            self.lattice, self.state, params, np.random.default_rng(0), self.m_total
        )
        self.assertEqual(state.n_cells, len(front))
        for cell in front:
            with self.subTest(cell=cell):
                self.assertEqual(lattice.kinds[cell], CellKind.BIOFILM.value)
                self.assertEqual(state.concentration[cell], 450.0)
                self.assertEqual(state.m_ox[cell], self.m_total)
        # Inputs are left untouched
        self.assertEqual(self.state.n_cells, 0)
        self.assertFalse(self.lattice.is_kind(CellKind.BIOFILM).any())

    def test_partial_attachment_is_seeded(self):
        params = BiofilmParameters(attachment_cells=2)
        first = attach(self.lattice, self.state, params, np.random.default_rng(11), self.m_total)
        second = attach(self.lattice, self.state, params, np.random.default_rng(11), self.m_total)
        self.assertEqual(first[1].n_cells, 2)
        self.assertEqual(first[0], second[0])
        np.testing.assert_array_equal(first[1].concentration, second[1].concentration)
        colonised = [tuple(cell) for cell in np.argwhere(first[1].living)]
        self.assertTrue(set(colonised) <= set(interface_cells(self.lattice)))

    def test_no_attachment(self):
        params = BiofilmParameters(attachment_cells=0)
        lattice, state = attach(
            self.lattice, self.state, params, np.random.default_rng(0), self.m_total
        )
        self.assertEqual(lattice, self.lattice)
        self.assertEqual(state.n_cells, 0)

    def test_shape_mismatch(self):
        with self.assertRaises(InputError):
            attach(
                self.lattice,
                BiofilmState.empty((2, 2)),
                BiofilmParameters(),
                np.random.default_rng(0),
                self.m_total,
            )


def test_grow():
    electro = ElectroParams()
    params = BiofilmParameters()
    concentration = np.array([[0.0, 450.0], [500.0, 0.0]])
    m_ox = np.array([[0.0, 0.05], [0.01, 0.0]])
    state = BiofilmState(concentration=concentration, m_ox=m_ox)
    substrate = np.full((2, 2), 410.0)

    grown = grow(state, substrate, electro, params, dt_h=1.0)
    rate = monod_rate(substrate, m_ox, electro)
    expected = concentration * (1 + params.growth_yield * rate / 24)
    np.testing.assert_allclose(grown.concentration, expected, rtol=1e-14)
    assert grown.concentration[0, 0] == 0.0
    np.testing.assert_array_equal(grown.m_ox, m_ox)

    fixed = grow(state, substrate, electro, params, dt_h=2.0, uptake_rate=np.full((2, 2), 2.4))
    assert fixed.concentration[0, 1] == pytest.approx(450.0 * (1 + 0.1 * 2.4 * 2.0 / 24))


class TestSpreading(TestCase):
    def test_spread_into_fluid_neighbour(self):
        lattice = load_geometry("WWWWWWW\nI.....O\nI.###.O\nI.#B#.O\nI.#.#.O\nI.....O\nWWWWWWW\n")
        state = _state_from(lattice, {(3, 3): (600.0, 0.03)})
        spread_lattice, spread_state = spread(
            lattice, state, BiofilmParameters(), np.random.default_rng(0)
        )
        self.assertAlmostEqual(spread_state.concentration[3, 3], 360.0)
        self.assertAlmostEqual(spread_state.concentration[4, 3], 240.0)
        self.assertEqual(spread_state.m_ox[4, 3], 0.03)
        self.assertEqual(spread_lattice.kinds[4, 3], CellKind.BIOFILM.value)

    def test_spread_shifts_biofilm_towards_free_space(self):
        lattice = load_geometry(
            "WWWWWWWW\nI......O\nI.####.O\nI.#BBB.O\nI.####.O\nI......O\nWWWWWWWW\n"
        )
        state = _state_from(
            lattice, {(3, 3): (600.0, 0.03), (3, 4): (300.0, 0.02), (3, 5): (400.0, 0.01)}
        )
        spread_lattice, spread_state = spread(
            lattice, state, BiofilmParameters(), np.random.default_rng(0)
        )
        np.testing.assert_allclose(spread_state.concentration[3, 3:7], [360, 240, 300, 400])
        np.testing.assert_allclose(spread_state.m_ox[3, 3:7], [0.03, 0.03, 0.02, 0.01])
        self.assertEqual(spread_lattice.kinds[3, 6], CellKind.BIOFILM.value)
        self.assertAlmostEqual(total_biomass(spread_state), total_biomass(state))
        self.assertAlmostEqual(total_mediator(spread_state), total_mediator(state))

    def test_spread_conserves_biomass_and_mediator(self):
        rng = np.random.default_rng(5)
        cells = [(y, x) for y in range(4, 8) for x in range(8, 12)]
        lattice, state = biofilm_block(make_channel(length=20, width=10), cells, 450.0, 0.05)
        for cell in cells:
            state.concentration[cell] = rng.uniform(400.0, 700.0)
            state.m_ox[cell] = rng.uniform(0.0, 0.05)
        params = BiofilmParameters()
        spread_lattice, spread_state = spread(lattice, state, params, np.random.default_rng(3))
        self.assertAlmostEqual(
            total_biomass(spread_state) / total_biomass(state), 1.0, delta=1e-12
        )
        self.assertAlmostEqual(
            total_mediator(spread_state) / total_mediator(state), 1.0, delta=1e-12
        )
        self.assertLessEqual(spread_state.concentration.max(), params.max_concentration)
        self.assertGreater(spread_state.n_cells, state.n_cells)
        np.testing.assert_array_equal(
            spread_lattice.is_kind(CellKind.BIOFILM), spread_state.living
        )

    def test_spread_skips_a_neighbour_sealed_in_a_pocket(self):
        lattice = load_geometry("WWWWWWW\nI.....O\nI.#B#.O\nI.#B#.O\nI.###.O\nWWWWWWW\n")
        state = _state_from(lattice, {(2, 3): (513.0, 0.05), (3, 3): (450.0, 0.04)})
        for seed in range(8):
            with self.subTest(seed=seed):
                spread_lattice, spread_state = spread(
                    lattice, state, BiofilmParameters(), np.random.default_rng(seed)
                )
                self.assertEqual(spread_lattice.kinds[1, 3], CellKind.BIOFILM.value)
                self.assertAlmostEqual(spread_state.concentration[1, 3], 0.4 * 513.0)
                self.assertAlmostEqual(spread_state.concentration[2, 3], 0.6 * 513.0)
                self.assertEqual(spread_state.concentration[3, 3], 450.0)
                self.assertEqual(spread_state.m_ox[1, 3], 0.05)
                self.assertAlmostEqual(total_biomass(spread_state), total_biomass(state))

    def test_nothing_to_spread(self):
        lattice, state = biofilm_block(make_channel(length=8, width=4), [(2, 3)], 450.0, 0.05)
        spread_lattice, spread_state = spread(
            lattice, state, BiofilmParameters(), np.random.default_rng(0)
        )
        self.assertEqual(spread_lattice, lattice)
        np.testing.assert_array_equal(spread_state.concentration, state.concentration)

    def test_clogged(self):
        masks = {
            "enclosed origin": ("WWWWW\nI###O\nI#B#O\nI###O\nWWWWW\n", {(2, 2): (600.0, 0.05)}),
            "enclosed neighbour": (
                "WWWWWW\nI####O\nI#BB#O\nI####O\nWWWWWW\n",
                {(2, 2): (600.0, 0.05), (2, 3): (300.0, 0.05)},
            ),
        }
        for name, (mask, values) in masks.items():
            with self.subTest(case=name):
                lattice = load_geometry(mask)
                state = _state_from(lattice, values)
                with self.assertRaises(BiofilmClogError):
                    spread(lattice, state, BiofilmParameters(), np.random.default_rng(0))


def test_totals():
    state = BiofilmState(
        concentration=np.array([[100.0, 0.0], [300.0, 0.0]]),
        m_ox=np.array([[0.01, 0.0], [0.02, 0.0]]),
    )
    assert total_biomass(state) == pytest.approx(400.0)
    assert total_biomass(state, cell_volume_l=1e-3) == pytest.approx(0.4)
    assert total_mediator(state, cell_volume_l=2.0) == pytest.approx(2 * (1.0 + 6.0))
