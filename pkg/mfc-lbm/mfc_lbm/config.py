"""Run configuration read from an INI file.

Every key is optional and defaults to the reference parameter set. Keys are addressed as
``section.key`` in messages and in the manifest echo. Units:

[lattice]
    width (cells), height (cells, wall rows included), porosity (-), seed (-), dx_mm (mm),
    geometry (path to a text mask, overrides width/height/porosity)
[flow]
    tau (-), viscosity (mm2/s), inlet_velocity (mm/s), tolerance (-), check_every (steps),
    max_steps (steps)
[ade]
    tau_d (-), diffusivity (mm2/s), C_in (mg substrate/L), tolerance (-), check_every (steps),
    max_steps (steps), overshoot_tolerance (-, relative excess over C_in that aborts the solve)
[electro]
    M_total (mg mediator/mg biomass), Y (mg mediator/mg substrate), gamma (mg mediator/mol),
    m (-), F (C/mol), V_a (L), q_max (mg substrate/(mg biomass day)), K_s (mg/L),
    K_Mox (mg mediator/L), I_0 (A/m2), A_a (m2), E_0 (V), R_int (ohm), R_ext (ohm),
    R (J/(mol K)), T (K), epsilon (mg mediator/mg biomass), mediator_substeps (-),
    q_max_time_base (h, 24 reads q_max per day)
[biofilm]
    k_ata (cells/h), C0_bio (mg biomass/L), Cmax_bio (mg biomass/L), fr_spr (-),
    Y_g (mg biomass/mg substrate)
[run]
    hours (h), snapshot_every (h, 0 writes the final hour only), seed (-), greymaps (bool),
    checkpoint_every (h, 0 disables)
"""

from configparser import ConfigParser, Error as ConfigParserError
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, NamedTuple, Optional, Union
import os

from . import get_logger
from .biofilm import BiofilmParameters
from .electrochem import ElectroParams
from .exceptions import ConfigurationError, InputError
from .grid import UnitScales
from .lbm_model.advection_diffusion import AdeParameters
from .lbm_model.flow import FlowParameters

logger = get_logger(__name__)


@dataclass(kw_only=True)
class LatticeConfig:
    width: int = 60
    height: int = 65
    porosity: float = 0.874
    seed: int = 1
    dx_mm: float = 1.0
    geometry: Optional[str] = None


@dataclass(kw_only=True)
class FlowConfig:
    tau: float = 0.6706
    viscosity_mm2_per_s: float = 1.004
    inlet_velocity_mm_per_s: float = 1.758e-2
    tolerance: float = 1e-8
    check_every: int = 100
    max_steps: int = 200_000


@dataclass(kw_only=True)
class AdeConfig:
    tau_d: float = 0.5036
    diffusivity_mm2_per_s: float = 0.0012
    inlet_concentration: float = 410.0
    tolerance: float = 1e-8
    check_every: int = 100
    max_steps: int = 200_000
    overshoot_tolerance: float = 2e-2


@dataclass(kw_only=True)
class RunConfig:
    hours: int = 72
    snapshot_every: int = 24
    seed: int = 1
    greymaps: bool = True
    checkpoint_every: int = 0


@dataclass(kw_only=True)
class SimulationConfig:
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    ade: AdeConfig = field(default_factory=AdeConfig)
    electro: ElectroParams = field(default_factory=ElectroParams)
    biofilm: BiofilmParameters = field(default_factory=BiofilmParameters)
    run: RunConfig = field(default_factory=RunConfig)

    def unit_scales(self, n_cells: int) -> UnitScales:
        return UnitScales.from_parameters(
            dx_mm=self.lattice.dx_mm,
            tau=self.flow.tau,
            viscosity_mm2_per_s=self.flow.viscosity_mm2_per_s,
            tau_d=self.ade.tau_d,
            diffusivity_mm2_per_s=self.ade.diffusivity_mm2_per_s,
            anode_volume_l=self.electro.anode_volume_l,
            n_cells=n_cells,
        )

    def flow_parameters(self, scales: UnitScales) -> FlowParameters:
        return FlowParameters(
            tau=self.flow.tau,
            inlet_velocity=scales.velocity_to_flow_lattice(self.flow.inlet_velocity_mm_per_s),
            tolerance=self.flow.tolerance,
            check_every=self.flow.check_every,
            max_steps=self.flow.max_steps,
        )

    def ade_parameters(self, scales: UnitScales) -> AdeParameters:
        return AdeParameters(
            tau_d=self.ade.tau_d,
            inlet_concentration=self.ade.inlet_concentration,
            dt_s=scales.dt_ade_s,
            tolerance=self.ade.tolerance,
            check_every=self.ade.check_every,
            max_steps=self.ade.max_steps,
            overshoot_tolerance=self.ade.overshoot_tolerance,
        )

    def with_overrides(
        self,
        *,
        seed: Optional[int] = None,
        hours: Optional[int] = None,
        snapshot_every: Optional[int] = None,
        geometry: Optional[str] = None,
    ) -> "SimulationConfig":
        """Copy with command line overrides applied; a seed overrides both lattice and run seeds"""
        lattice, run = self.lattice, self.run
        if seed is not None:
            lattice = replace(lattice, seed=seed)
            run = replace(run, seed=seed)
        if geometry is not None:
            lattice = replace(lattice, geometry=geometry)
        if hours is not None:
            if hours < 1:
                msg = f"run.hours must be at least 1, got {hours}"
                logger.error(msg)
                raise ConfigurationError(msg)
            run = replace(run, hours=hours)
        if snapshot_every is not None:
            if snapshot_every < 0:
                msg = f"run.snapshot_every must be non-negative, got {snapshot_every}"
                logger.error(msg)
                raise ConfigurationError(msg)
            run = replace(run, snapshot_every=snapshot_every)
        return replace(self, lattice=lattice, run=run)

    def echo(self) -> Dict[str, Any]:
        """Resolved configuration as ``section.key`` -> value, derived defaults included"""
        result: Dict[str, Any] = {}
        for section, keys in _SCHEMA.items():
            group = getattr(self, section)
            for key, entry in keys.items():
                result[f"{section}.{key}"] = getattr(group, entry.attribute)
        return result


class _Key(NamedTuple):
    attribute: str
    kind: type
    check: Callable[[Any], bool]
    expected: str


def _positive(value) -> bool:
    return value > 0


def _non_negative(value) -> bool:
    return value >= 0


def _anything(value) -> bool:
    return True


def _key(attribute: str, kind: type, check=_positive, expected: str = "positive") -> _Key:
    return _Key(attribute=attribute, kind=kind, check=check, expected=expected)


_SCHEMA: Dict[str, Dict[str, _Key]] = {
    "lattice": {
        "width": _key("width", int, lambda v: v >= 4, ">= 4"),
        "height": _key("height", int, lambda v: v >= 4, ">= 4"),
        "porosity": _key("porosity", float, lambda v: 0 < v <= 1, "in (0, 1]"),
        "seed": _key("seed", int, _non_negative, "non-negative"),
        "dx_mm": _key("dx_mm", float),
        "geometry": _key("geometry", str, _anything, "a path"),
    },
    "flow": {
        "tau": _key("tau", float, lambda v: v > 0.5, "> 0.5"),
        "viscosity": _key("viscosity_mm2_per_s", float),
        "inlet_velocity": _key("inlet_velocity_mm_per_s", float, _non_negative, "non-negative"),
        "tolerance": _key("tolerance", float),
        "check_every": _key("check_every", int),
        "max_steps": _key("max_steps", int),
    },
    "ade": {
        "tau_d": _key("tau_d", float, lambda v: v > 0.5, "> 0.5"),
        "diffusivity": _key("diffusivity_mm2_per_s", float),
        "C_in": _key("inlet_concentration", float, _non_negative, "non-negative"),
        "tolerance": _key("tolerance", float),
        "check_every": _key("check_every", int),
        "max_steps": _key("max_steps", int),
        "overshoot_tolerance": _key("overshoot_tolerance", float),
    },
    "electro": {
        "M_total": _key("m_total", float),
        "Y": _key("mediator_yield", float),
        "gamma": _key("mediator_molar_mass", float),
        "m": _key("electrons", int, lambda v: v >= 1, ">= 1"),
        "F": _key("faraday", float),
        "V_a": _key("anode_volume_l", float),
        "q_max": _key("q_max", float),
        "K_s": _key("k_s", float),
        "K_Mox": _key("k_mox", float),
        "I_0": _key("i_0", float),
        "A_a": _key("anode_area_m2", float),
        "E_0": _key("e_0", float),
        "R_int": _key("r_int", float),
        "R_ext": _key("r_ext", float),
        "R": _key("gas_constant", float),
        "T": _key("temperature", float),
        "epsilon": _key("epsilon", float),
        "mediator_substeps": _key("mediator_substeps", int, lambda v: v >= 1, ">= 1"),
        "q_max_time_base": _key("q_max_time_base_h", float),
    },
    "biofilm": {
        "k_ata": _key("attachment_cells", int, _non_negative, "non-negative"),
        "C0_bio": _key("initial_concentration", float),
        "Cmax_bio": _key("max_concentration", float),
        "fr_spr": _key("spread_fraction", float, lambda v: 0 < v < 1, "in (0, 1)"),
        "Y_g": _key("growth_yield", float, _non_negative, "non-negative"),
    },
    "run": {
        "hours": _key("hours", int, lambda v: v >= 1, ">= 1"),
        "snapshot_every": _key("snapshot_every", int, _non_negative, "non-negative"),
        "seed": _key("seed", int, _non_negative, "non-negative"),
        "greymaps": _key("greymaps", bool, _anything, "a boolean"),
        "checkpoint_every": _key("checkpoint_every", int, _non_negative, "non-negative"),
    },
}

_SECTION_TYPES = {
    "lattice": LatticeConfig,
    "flow": FlowConfig,
    "ade": AdeConfig,
    "electro": ElectroParams,
    "biofilm": BiofilmParameters,
    "run": RunConfig,
}


def _convert(path: str, raw: str, entry: _Key) -> Any:
    text = raw.strip()
    try:
        if entry.kind is bool:
            lowered = text.lower()
            if lowered not in ConfigParser.BOOLEAN_STATES:
                raise ValueError(text)
            value: Any = ConfigParser.BOOLEAN_STATES[lowered]
        elif entry.kind is str:
            value = text or None
        else:
            value = entry.kind(text)
    except ValueError:
        msg = f"{path}: expected {entry.kind.__name__}, got '{raw}'"
        logger.error(msg)
        raise ConfigurationError(msg) from None
    if value is not None and not entry.check(value):
        msg = f"{path}: value {value} out of range, must be {entry.expected}"
        logger.error(msg)
        raise ConfigurationError(msg)
    return value


def parse_config_text(text: str, source: str = "<string>") -> SimulationConfig:
    """Parses INI text; an empty text gives the default configuration"""
    parser = ConfigParser(delimiters=["="], interpolation=None)
    parser.optionxform = str  # type: ignore[assignment, method-assign]
    try:
        parser.read_string(text, source=source)
    except ConfigParserError as err:
        msg = f"{source}: cannot parse configuration: {err}"
        logger.error(msg)
        raise ConfigurationError(msg) from err

    sections: Dict[str, Any] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            msg = f"{section}: unknown section in {source}"
            logger.error(msg)
            raise ConfigurationError(msg)
        kwargs = {}
        for key, raw in parser.items(section):
            path = f"{section}.{key}"
            if key not in _SCHEMA[section]:
                msg = f"{path}: unknown key in {source}"
                logger.error(msg)
                raise ConfigurationError(msg)
            entry = _SCHEMA[section][key]
            kwargs[entry.attribute] = _convert(path, raw, entry)
        try:
            sections[section] = _SECTION_TYPES[section](**kwargs)
        except InputError as err:
            msg = f"{section}: {err}"
            logger.error(msg)
            raise ConfigurationError(msg) from err
    return SimulationConfig(**sections)


def parse_config(path: Union[str, os.PathLike]) -> SimulationConfig:
    """
    Reads and validates a configuration file.

    :param path: path to the INI file
    :return: SimulationConfig with defaults for every key not given
    :raises ConfigurationError: for a missing file, unknown section or key, type mismatch or
        out of range value; the message starts with the key path
    """
    if not os.path.isfile(path):
        msg = f"Configuration file not found: {path}"
        logger.error(msg)
        raise ConfigurationError(msg)
    with open(path, "rt") as file:
        return parse_config_text(file.read(), source=str(path))


def config_keys() -> Dict[str, str]:
    """Every accepted ``section.key`` with its value type"""
    return {
        f"{section}.{key}": entry.kind.__name__
        for section, keys in _SCHEMA.items()
        for key, entry in keys.items()
    }

