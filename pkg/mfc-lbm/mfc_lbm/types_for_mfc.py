from dataclasses import dataclass, asdict
from enum import Enum, unique
from typing import TypeVar, Dict

import numpy as np

NumericT = TypeVar("NumericT", float, np.ndarray)


@unique
class CellKind(Enum):
    FLUID = 0
    ELECTRODE_SOLID = 1
    BIOFILM = 2
    WALL = 3
    INLET = 4
    OUTLET = 5


#: Geometry mask alphabet
CELL_KIND_TO_CHAR: Dict[CellKind, str] = {
    CellKind.FLUID: ".",
    CellKind.ELECTRODE_SOLID: "#",
    CellKind.BIOFILM: "B",
    CellKind.WALL: "W",
    CellKind.INLET: "I",
    CellKind.OUTLET: "O",
}
CHAR_TO_CELL_KIND: Dict[str, CellKind] = {v: k for k, v in CELL_KIND_TO_CHAR.items()}


@unique
class TerminationStatus(Enum):
    COMPLETED = "completed"
    CLOGGED = "clogged"
    NON_CONVERGED = "non_converged"


@dataclass(frozen=True)
class ElectricalRecord:
    """Electrical outputs of one hourly iteration

    Attributes:
        hour: index of the outer iteration
        current_a: cell current I_cell in A
        voltage_v: cell voltage V_cell in V
        n_conc_v: concentration overpotential in V, nan when the mediator is depleted
        n_act_v: activation overpotential in V
        m_red_fraction: biomass weighted M_red / M_total
        m_ox_fraction: biomass weighted M_ox / M_total
        total_biomass_mg: biomass in the compartment in mg
        mean_substrate_mg_per_l: mean C_s over the pore space in mg/L
    """

    hour: int
    current_a: float
    voltage_v: float
    n_conc_v: float
    n_act_v: float
    m_red_fraction: float
    m_ox_fraction: float
    total_biomass_mg: float
    mean_substrate_mg_per_l: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)
