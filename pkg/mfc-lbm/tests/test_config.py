import os
from dataclasses import fields
from unittest import TestCase

import pytest

from mfc_lbm.config import (
    _SCHEMA,
    _SECTION_TYPES,
    SimulationConfig,
    config_keys,
    parse_config,
    parse_config_text,
)
from mfc_lbm.exceptions import ConfigurationError
from tests.utility import small_config


class TestParseConfig(TestCase):
    def test_empty_text_gives_defaults(self):
        config = parse_config_text("")
        self.assertEqual(config, SimulationConfig())
        self.assertEqual(config.electro.r_ext, 360.0)
        self.assertEqual(config.electro.q_max, 8.48)
        self.assertEqual(config.lattice.width, 60)
        self.assertEqual(config.run.hours, 72)
        self.assertIsNone(config.lattice.geometry)

    def test_values_are_read(self):
        config = parse_config_text(
            "[electro]\nR_ext = 1000\nm = 2\n\n[run]\nhours = 5\ngreymaps = no\n"
            "[lattice]\ngeometry = anode.txt\n"
        )
        self.assertEqual(config.electro.r_ext, 1000.0)
        self.assertEqual(config.run.hours, 5)
        self.assertFalse(config.run.greymaps)
        self.assertEqual(config.lattice.geometry, "anode.txt")
        # Untouched sections keep their defaults
        self.assertEqual(config.biofilm.attachment_cells, 200)

    def test_errors_name_the_key(self):
        cases = {
            "out of range": ("[lattice]\nporosity = 1.5\n", "lattice.porosity"),
            "type mismatch": ("[electro]\nm = 1.5\n", "electro.m"),
            "boolean": ("[run]\ngreymaps = maybe\n", "run.greymaps"),
            "unknown key": ("[flow]\nomega = 1.2\n", "flow.omega"),
            "unknown section": ("[solver]\ntau = 0.7\n", "solver"),
            "tau below one half": ("[ade]\ntau_d = 0.5\n", "ade.tau_d"),
            "syntax": ("tau = 0.7\n", "cannot parse"),
        }
        for name, (text, fragment) in cases.items():
            with self.subTest(case=name):
                with self.assertRaises(ConfigurationError) as context:
                    parse_config_text(text)
                self.assertIn(fragment, str(context.exception))

    def test_missing_file(self):
        with self.assertRaises(ConfigurationError):
            parse_config(os.path.join("does", "not", "exist.ini"))

    def test_echo(self):
        echo = parse_config_text("[electro]\nR_ext = 500\n").echo()
        self.assertEqual(echo["electro.R_ext"], 500.0)
        self.assertEqual(echo["biofilm.k_ata"], 200)
        self.assertEqual(set(echo), set(config_keys()))

    def test_schema_matches_sections(self):
        for section, keys in _SCHEMA.items():
            attributes = {item.name for item in fields(_SECTION_TYPES[section])}
            for key, entry in keys.items():
                with self.subTest(key=f"{section}.{key}"):
                    self.assertIn(entry.attribute, attributes)


class TestOverrides(TestCase):
    def test_seed_overrides_both_streams(self):
        config = SimulationConfig().with_overrides(seed=42, hours=3, snapshot_every=0)
        self.assertEqual(config.lattice.seed, 42)
        self.assertEqual(config.run.seed, 42)
        self.assertEqual(config.run.hours, 3)
        self.assertEqual(config.run.snapshot_every, 0)

    def test_nothing_to_override(self):
        config = small_config()
        self.assertEqual(config.with_overrides(), config)

    def test_invalid_overrides(self):
        for kwargs in [{"hours": 0}, {"snapshot_every": -1}]:
            with self.subTest(**kwargs):
                with self.assertRaises(ConfigurationError):
                    SimulationConfig().with_overrides(**kwargs)


def test_parse_config_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[biofilm]\nk_ata = 5\nfr_spr = 0.3\n")
    config = parse_config(path)
    assert config.biofilm.attachment_cells == 5
    assert config.biofilm.spread_fraction == pytest.approx(0.3)


def test_unit_scales_of_small_config():
    config = small_config()
    scales = config.unit_scales(n_cells=140)
    assert scales.dt_ade_s == pytest.approx(1.0)
    ade = config.ade_parameters(scales)
    assert ade.dt_s == pytest.approx(1.0)
    assert ade.overshoot_tolerance == pytest.approx(2e-2)
    # The flow velocity carried over to the ADE clock in lattice units
    inflow = scales.velocity_to_flow_lattice(1.758e-2) * scales.flow_to_ade_velocity_factor
    assert inflow == pytest.approx(1.758e-2)


def test_time_base_and_overshoot_keys():
    text = "[electro]\nq_max_time_base = 1\n\n[ade]\novershoot_tolerance = 0.05\n"
    config = parse_config_text(text)
    assert config.electro.q_max_time_base_h == 1.0
    assert config.electro.q_max_time_base_s == pytest.approx(3600.0)
    assert config.ade.overshoot_tolerance == pytest.approx(0.05)
    assert SimulationConfig().electro.q_max_time_base_h == 24.0
    for text in ["[electro]\nq_max_time_base = 0\n", "[ade]\novershoot_tolerance = -1\n"]:
        with pytest.raises(ConfigurationError):
            parse_config_text(text)
