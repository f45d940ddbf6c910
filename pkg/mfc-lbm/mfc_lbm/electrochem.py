"""Bio-electrochemical output model of the anode.

Substrate uptake follows a double Monod law in substrate and oxidised mediator. The cell
current solves the implicit pair of the Butler-Volmer activation loss and the resistive circuit,
and the intracellular mediator is reduced by uptake and reoxidised by the current.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional, TYPE_CHECKING

import numpy as np

from . import get_logger
from .constant import (
    faraday_c_per_mol,
    gas_constant_j_per_mol_k,
    standard_temperature_k,
    hours_per_day,
    seconds_per_hour,
    compartment_depth_mm,
    compartment_width_mm,
    compartment_height_mm,
    electrode_width_mm,
    litre_per_mm3,
)
from .exceptions import InputError, MediatorDepletedError
from .types_for_mfc import NumericT

if TYPE_CHECKING:
    from .biofilm import BiofilmState

logger = get_logger(__name__)

#: M_red below this fraction of M_total counts as a depleted mediator
depletion_floor = 1e-9

_default_anode_volume_l = (
    compartment_depth_mm * compartment_width_mm * compartment_height_mm * litre_per_mm3
)
_default_anode_area_m2 = 2 * electrode_width_mm * compartment_height_mm * 1e-6


@dataclass(kw_only=True)
class ElectroParams:
    """
    Attributes:
        m_total: total intracellular mediator, mg mediator / mg biomass
        mediator_yield: Y, mg mediator / mg substrate
        mediator_molar_mass: gamma, mg mediator / mol mediator
        electrons: m, electrons transferred per mediator molecule
        faraday: F, C/mol
        anode_volume_l: V_a, L
        q_max: maximum uptake rate, mg substrate / (mg biomass day)
        k_s: substrate half saturation, mg/L
        k_mox: oxidised mediator half saturation, 0.02 M_total when not given
        i_0: exchange current density, A/m2
        anode_area_m2: A_a, m2
        e_0: open circuit voltage, V
        r_int: internal resistance, ohm
        r_ext: external load, ohm
        gas_constant: R, J/(mol K)
        temperature: T, K
        epsilon: current bound at low M_red, 1e-4 M_total when not given
        mediator_substeps: equal sub-steps of the hourly current and mediator integration
        q_max_time_base_h: hours per unit of time in q_max. 24 reads q_max per day. 1 applies
            it per hourly iteration, which raises uptake, growth and mediator reduction 24-fold.
    """

    m_total: float = 0.05
    mediator_yield: float = 0.5687
    mediator_molar_mass: float = 663400.0
    electrons: int = 2
    faraday: float = faraday_c_per_mol
    anode_volume_l: float = _default_anode_volume_l
    q_max: float = 8.48
    k_s: float = 20.0
    k_mox: Optional[float] = None
    i_0: float = 0.001
    anode_area_m2: float = _default_anode_area_m2
    e_0: float = 0.7
    r_int: float = 360.0
    r_ext: float = 360.0
    gas_constant: float = gas_constant_j_per_mol_k
    temperature: float = standard_temperature_k
    epsilon: Optional[float] = None
    mediator_substeps: int = 360
    q_max_time_base_h: float = hours_per_day

    def __post_init__(self):
        if self.k_mox is None:
            self.k_mox = 0.02 * self.m_total
        if self.epsilon is None:
            self.epsilon = 1e-4 * self.m_total
        for name in [
            "m_total",
            "mediator_yield",
            "mediator_molar_mass",
            "faraday",
            "anode_volume_l",
            "q_max",
            "k_s",
            "k_mox",
            "i_0",
            "anode_area_m2",
            "e_0",
            "r_int",
            "r_ext",
            "gas_constant",
            "temperature",
            "epsilon",
            "q_max_time_base_h",
        ]:
            value = getattr(self, name)
            if not value > 0:
                msg = f"The electrochemical parameter {name} must be positive, got {value}"
                logger.error(msg)
                raise InputError(msg)
        if int(self.electrons) != self.electrons or self.electrons < 1:
            msg = f"The number of electrons must be an integer >= 1, got {self.electrons}"
            logger.error(msg)
            raise InputError(msg)
        if int(self.mediator_substeps) != self.mediator_substeps or self.mediator_substeps < 1:
            msg = (
                f"The mediator sub-step count must be an integer >= 1, got "
                f"{self.mediator_substeps}"
            )
            logger.error(msg)
            raise InputError(msg)

    @property
    def thermal_voltage(self) -> float:
        """RT/F in V"""
        return self.gas_constant * self.temperature / self.faraday

    @property
    def r_total(self) -> float:
        return self.r_int + self.r_ext

    @property
    def depletion_threshold(self) -> float:
        return depletion_floor * self.m_total

    @property
    def q_max_time_base_s(self) -> float:
        return self.q_max_time_base_h * seconds_per_hour


class MediatorAggregate(NamedTuple):
    """Biomass weighted mediator state of the whole anode"""

    m_ox: float
    m_red: float
    m_ox_fraction: float
    m_red_fraction: float
    total_biomass_mg: float


@dataclass(frozen=True)
class CircuitState:
    current_a: float
    voltage_v: float
    n_conc_v: float
    n_act_v: float
    depleted: bool = False


@dataclass
class MediatorUpdate:
    state: "BiofilmState"
    clamped_cells: int = 0


def monod_rate(substrate: NumericT, m_ox: NumericT, p: ElectroParams) -> NumericT:
    """
    Double Monod uptake rate q_a in mg substrate / (mg biomass day)

    :param substrate: C_s in mg/L
    :param m_ox: oxidised mediator in mg mediator / mg biomass
    :param p: ElectroParams
    :return: q_a, same shape as the inputs
    """
    return (
        p.q_max
        * (substrate / (substrate + p.k_s))
        * (m_ox / (m_ox + p.k_mox))  # type: ignore[operator]
    )


def concentration_overpotential(m_total: float, m_red: float, p: ElectroParams) -> float:
    """Nernst loss (RT/F) ln(M_total / M_red) in V"""
    if m_red <= depletion_floor * m_total:
        msg = f"Mediator depleted: M_red = {m_red:.3e} with M_total = {m_total:.3e}"
        logger.debug(msg)
        raise MediatorDepletedError(msg)
    return p.thermal_voltage * float(np.log(m_total / m_red))


def _activation_coefficient(m_ox: float, m_red: float, p: ElectroParams) -> float:
    """K in n_act = K I"""
    return p.thermal_voltage / p.electrons * (m_ox / m_red) / (p.anode_area_m2 * p.i_0)


def activation_overpotential(current: float, m_ox: float, m_red: float, p: ElectroParams) -> float:
    """Linearised Butler-Volmer loss I / (A_a I_0) RT / (mF) M_ox / M_red in V"""
    if m_red <= p.depletion_threshold:
        msg = f"Mediator depleted: M_red = {m_red:.3e} with M_total = {p.m_total:.3e}"
        logger.warning(msg)
        raise MediatorDepletedError(msg)
    return current * _activation_coefficient(m_ox, m_red, p)


def solve_cell_current(n_conc: float, m_ox: float, m_red: float, p: ElectroParams) -> float:
    """
    Cell current in A from the implicit pair

        I = (E_0 - n_conc - n_act) / (R_int + R_ext) * M_red / (eps + M_red),  n_act = K I

    which is linear in I: ``I = s (E_0 - n_conc) / (R_int + R_ext + s K)`` with
    ``s = M_red / (eps + M_red)``. Negative driving force gives zero current.
    """
    if m_red <= p.depletion_threshold:
        return 0.0
    s = m_red / (p.epsilon + m_red)  # type: ignore[operator]
    k = _activation_coefficient(m_ox, m_red, p)
    current = s * (p.e_0 - n_conc) / (p.r_total + s * k)
    return max(current, 0.0)


def solve_cell_current_fixed_point(
    n_conc: float,
    m_ox: float,
    m_red: float,
    p: ElectroParams,
    tolerance: float = 1e-14,
    max_iterations: int = 10_000,
) -> float:
    """Damped fixed-point iteration of the implicit current pair, kept as an oracle"""
    if m_red <= p.depletion_threshold:
        return 0.0
    s = m_red / (p.epsilon + m_red)  # type: ignore[operator]
    k = _activation_coefficient(m_ox, m_red, p)
    damping = 0.9 / (1 + s * k / p.r_total)
    current = 0.0
    for _ in range(max_iterations):
        n_act = k * current
        update = s * (p.e_0 - n_conc - n_act) / p.r_total
        new_current = (1 - damping) * current + damping * update
        if abs(new_current - current) <= tolerance * max(abs(new_current), 1e-300):
            current = new_current
            break
        current = new_current
    return max(current, 0.0)


def cell_voltage(current: float, p: ElectroParams) -> float:
    """Voltage across the external load, I R_ext"""
    return current * p.r_ext


def _biomass_mg(state: "BiofilmState", cell_volume_l: float) -> np.ndarray:
    return state.concentration * cell_volume_l


def mediator_aggregate(
    state: "BiofilmState", cell_volume_l: float, p: ElectroParams
) -> MediatorAggregate:
    """Biomass weighted means of M_ox and M_red over the biofilm. An empty biofilm is oxidised."""
    biomass = _biomass_mg(state, cell_volume_l)
    total = float(biomass.sum())
    if total <= 0.0:
        return MediatorAggregate(
            m_ox=p.m_total, m_red=0.0, m_ox_fraction=1.0, m_red_fraction=0.0, total_biomass_mg=0.0
        )
    m_ox = float((biomass * state.m_ox).sum() / total)
    m_ox_fraction = m_ox / p.m_total
    return MediatorAggregate(
        m_ox=m_ox,
        m_red=p.m_total - m_ox,
        m_ox_fraction=m_ox_fraction,
        m_red_fraction=1.0 - m_ox_fraction,
        total_biomass_mg=total,
    )


def evaluate_circuit(aggregate: MediatorAggregate, p: ElectroParams) -> CircuitState:
    """Current, voltage and overpotentials for a mediator state; a depleted mediator gives I = 0"""
    if aggregate.total_biomass_mg <= 0.0:
        return CircuitState(current_a=0.0, voltage_v=0.0, n_conc_v=0.0, n_act_v=0.0)
    try:
        n_conc = concentration_overpotential(p.m_total, aggregate.m_red, p)
    except MediatorDepletedError:
        return CircuitState(
            current_a=0.0, voltage_v=0.0, n_conc_v=float("nan"), n_act_v=0.0, depleted=True
        )
    current = solve_cell_current(n_conc, aggregate.m_ox, aggregate.m_red, p)
    n_act = activation_overpotential(current, aggregate.m_ox, aggregate.m_red, p)
    return CircuitState(
        current_a=current, voltage_v=cell_voltage(current, p), n_conc_v=n_conc, n_act_v=n_act
    )


def update_mediator(
    state: "BiofilmState",
    uptake_rate: np.ndarray,
    current: float,
    p: ElectroParams,
    dt_h: float,
    cell_volume_l: float,
) -> MediatorUpdate:
    """
    Advances the oxidised mediator of every biofilm cell by ``dt_h`` hours:
    reduction ``Y q_a dt / 24`` by substrate uptake (24 being ``p.q_max_time_base_h``) and
    reoxidation by the cell current. The current is shared in proportion to biomass, so each
    cell gains ``gamma I dt_s / (m F total_biomass)``. M_ox is clamped to [0, M_total].

    :param state: BiofilmState
    :param uptake_rate: q_a field in mg substrate / mg biomass per q_max time base (a day)
    :param current: cell current in A
    :param p: ElectroParams
    :param dt_h: time step in h
    :param cell_volume_l: volume of one lattice cell in L
    :return: MediatorUpdate with the new state and the number of clamped cells
    """
    biomass = _biomass_mg(state, cell_volume_l)
    total = float(biomass.sum())
    if current > 0.0 and total <= 0.0:
        msg = "A positive cell current needs biomass to reoxidise the mediator"
        logger.error(msg)
        raise InputError(msg)
    living = state.concentration > 0.0
    if not living.any():
        return MediatorUpdate(state=state.copy(), clamped_cells=0)
    reduction = p.mediator_yield * uptake_rate * dt_h / p.q_max_time_base_h
    reoxidation = 0.0
    if current > 0.0:
        reoxidation = (
            p.mediator_molar_mass
            * current
            * dt_h
            * seconds_per_hour
            / (p.electrons * p.faraday * total)
        )
    unclamped = state.m_ox - reduction + reoxidation
    clamped = living & ((unclamped < 0.0) | (unclamped > p.m_total))
    m_ox = np.where(living, np.clip(unclamped, 0.0, p.m_total), 0.0)
    return MediatorUpdate(state=state.with_m_ox(m_ox), clamped_cells=int(clamped.sum()))
