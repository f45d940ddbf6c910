"""Agent-based biofilm: attachment on the electrode front, Monod growth and threshold spreading.

Every function returns new Lattice/BiofilmState objects and draws from the generator it is given,
so an hour is a pure function of (state, fields, generator state).
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import get_logger
from .electrochem import ElectroParams, monod_rate
from .exceptions import BiofilmClogError, InputError
from .grid import Lattice, Site, interface_cells
from .types_for_mfc import CellKind

logger = get_logger(__name__)

_NEIGHBOURS_4 = ((0, 1), (1, 0), (0, -1), (-1, 0))


@dataclass(kw_only=True)
class BiofilmParameters:
    """
    Attributes:
        attachment_cells: k_ata, cells colonised per hour
        initial_concentration: C_0^bio of a newly attached cell, mg biomass / L
        max_concentration: C_max^bio above which a cell spreads, mg biomass / L
        spread_fraction: fr_spr, fraction of the biomass handed to the freed neighbour
        growth_yield: Y_g, mg biomass / mg substrate
    """

    attachment_cells: int = 200
    initial_concentration: float = 450.0
    max_concentration: float = 512.5
    spread_fraction: float = 0.4
    growth_yield: float = 0.1

    def __post_init__(self):
        if int(self.attachment_cells) != self.attachment_cells or self.attachment_cells < 0:
            msg = f"The attachment count must be an integer >= 0, got {self.attachment_cells}"
            logger.error(msg)
            raise InputError(msg)
        if self.initial_concentration <= 0 or self.max_concentration <= 0:
            msg = "The initial and threshold biomass concentrations must be positive"
            logger.error(msg)
            raise InputError(msg)
        if not 0 < self.spread_fraction < 1:
            msg = f"The spreading fraction must be in (0, 1), got {self.spread_fraction}"
            logger.error(msg)
            raise InputError(msg)
        if self.growth_yield < 0:
            msg = f"The growth yield must be non-negative, got {self.growth_yield}"
            logger.error(msg)
            raise InputError(msg)


@dataclass
class BiofilmState:
    """Biomass C_bio (mg/L) and oxidised mediator M_ox (mg mediator / mg biomass) per cell"""

    concentration: np.ndarray
    m_ox: np.ndarray

    def __post_init__(self):
        self.concentration = np.asarray(self.concentration, dtype=float)
        self.m_ox = np.asarray(self.m_ox, dtype=float)
        if self.concentration.shape != self.m_ox.shape:
            msg = (
                f"Biomass {self.concentration.shape} and mediator {self.m_ox.shape} fields "
                f"have different shapes"
            )
            logger.error(msg)
            raise InputError(msg)

    @classmethod
    def empty(cls, shape: Tuple[int, int]) -> "BiofilmState":
        return cls(concentration=np.zeros(shape), m_ox=np.zeros(shape))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.concentration.shape  # type: ignore[return-value]

    @property
    def living(self) -> np.ndarray:
        return self.concentration > 0.0

    @property
    def n_cells(self) -> int:
        return int(self.living.sum())

    def copy(self) -> "BiofilmState":
        return BiofilmState(concentration=self.concentration.copy(), m_ox=self.m_ox.copy())

    def with_m_ox(self, m_ox: np.ndarray) -> "BiofilmState":
        return BiofilmState(concentration=self.concentration.copy(), m_ox=np.asarray(m_ox).copy())


def total_biomass(state: BiofilmState, cell_volume_l: float = 1.0) -> float:
    """Biomass in mg, or in mg/L x cells with the default cell volume"""
    return float(state.concentration.sum() * cell_volume_l)


def total_mediator(state: BiofilmState, cell_volume_l: float = 1.0) -> float:
    """Oxidised mediator held by the biofilm, mg mediator"""
    return float((state.concentration * state.m_ox).sum() * cell_volume_l)


def _check_shapes(lattice: Lattice, state: BiofilmState) -> None:
    if state.shape != lattice.shape:
        msg = f"Lattice {lattice.shape} and biofilm state {state.shape} have different dimensions"
        logger.error(msg)
        raise InputError(msg)


def attach(
    lattice: Lattice,
    state: BiofilmState,
    params: BiofilmParameters,
    rng: np.random.Generator,
    m_total: float,
) -> Tuple[Lattice, BiofilmState]:
    """
    Colonises min(k_ata, front size) distinct front cells drawn uniformly at random. New cells
    become Biofilm with C_bio = C_0^bio and a fully oxidised mediator.
    """
    _check_shapes(lattice, state)
    lattice = lattice.copy()
    state = state.copy()
    front = [site for site in interface_cells(lattice, state) if state.concentration[site] == 0]
    n_attach = min(params.attachment_cells, len(front))
    if n_attach == 0:
        return lattice, state
    chosen = rng.choice(len(front), size=n_attach, replace=False)
    for index in chosen:
        site = front[int(index)]
        lattice.kinds[site] = CellKind.BIOFILM.value
        state.concentration[site] = params.initial_concentration
        state.m_ox[site] = m_total
    return lattice, state


def grow(
    state: BiofilmState,
    substrate: np.ndarray,
    electro: ElectroParams,
    params: BiofilmParameters,
    dt_h: float = 1.0,
    uptake_rate: Optional[np.ndarray] = None,
) -> BiofilmState:
    """
    C_bio <- C_bio (1 + Y_g q_a dt / 24) at every biofilm cell, 24 being the q_max time base in
    hours. M_ox per unit biomass is kept, so the mediator pool grows with the biomass.

    :param state: BiofilmState
    :param substrate: C_s field in mg/L
    :param electro: ElectroParams for the Monod rate
    :param params: BiofilmParameters
    :param dt_h: time step in h
    :param uptake_rate: q_a field to use instead of evaluating the Monod rate
    :return: BiofilmState
    """
    if uptake_rate is None:
        uptake_rate = monod_rate(np.maximum(substrate, 0.0), state.m_ox, electro)
    factor = 1.0 + params.growth_yield * uptake_rate * dt_h / electro.q_max_time_base_h
    concentration = np.where(state.living, state.concentration * factor, 0.0)
    return BiofilmState(concentration=concentration, m_ox=state.m_ox.copy())


def _neighbours(site: Site, shape: Tuple[int, int]) -> List[Site]:
    y, x = site
    return [
        (y + dy, x + dx)
        for dy, dx in _NEIGHBOURS_4
        if 0 <= y + dy < shape[0] and 0 <= x + dx < shape[1]
    ]


def _free_neighbours(lattice: Lattice, site: Site) -> List[Site]:
    return [
        cell
        for cell in _neighbours(site, lattice.shape)
        if lattice.kinds[cell] == CellKind.FLUID.value
    ]


def _walk_to_free_space(
    lattice: Lattice, start: Site, origin: Site, rng: np.random.Generator, max_steps: int
) -> Optional[Tuple[List[Site], Site]]:
    """
    Random walk through contiguous biofilm from ``start`` (never entering ``origin``) until a
    biofilm cell with a Fluid neighbour is reached. Returns the loop-erased path and the free cell,
    or None when ``start`` is sealed off from every biofilm cell but ``origin``.
    """
    path: List[Site] = [start]
    position: Dict[Site, int] = {start: 0}
    for _ in range(max_steps + 1):
        current = path[-1]
        free = _free_neighbours(lattice, current)
        if free:
            return path, free[int(rng.integers(len(free)))]
        options = [
            cell
            for cell in _neighbours(current, lattice.shape)
            if cell != origin and lattice.kinds[cell] == CellKind.BIOFILM.value
        ]
        if not options:
            # only the start can dead-end, every later cell can step back
            return None
        step = options[int(rng.integers(len(options)))]
        if step in position:
            for erased in path[position[step] + 1 :]:
                del position[erased]
            path = path[: position[step] + 1]
        else:
            position[step] = len(path)
            path.append(step)
    msg = f"Biofilm clogged: no free space reachable from the cell at {origin} (y, x)"
    logger.warning(msg)
    raise BiofilmClogError(msg)


def _draw_target(
    lattice: Lattice, origin: Site, rng: np.random.Generator, max_walk_steps: int
) -> Tuple[Site, Optional[Tuple[List[Site], Site]]]:
    """
    Draws the spreading direction among the Fluid or Biofilm 4-neighbours of ``origin``. A Biofilm
    neighbour sealed in a pocket is dropped and the direction drawn again from the rest.
    """
    options = [
        cell
        for cell in _neighbours(origin, lattice.shape)
        if lattice.kinds[cell] in (CellKind.FLUID.value, CellKind.BIOFILM.value)
    ]
    while options:
        target = options.pop(int(rng.integers(len(options))))
        if lattice.kinds[target] == CellKind.FLUID.value:
            return target, None
        walk = _walk_to_free_space(lattice, target, origin, rng, max_walk_steps)
        if walk is not None:
            return target, walk
    msg = f"Biofilm clogged: the cell at {origin} (y, x) has no neighbour open to spreading"
    logger.warning(msg)
    raise BiofilmClogError(msg)


def spread(
    lattice: Lattice,
    state: BiofilmState,
    params: BiofilmParameters,
    rng: np.random.Generator,
    max_walk_steps: Optional[int] = None,
) -> Tuple[Lattice, BiofilmState]:
    """
    Resolves every cell above C_max^bio, first such cell in row-major order first.

    A direction is drawn among the Fluid or Biofilm 4-neighbours. A Fluid neighbour becomes
    Biofilm and receives fr_spr C_bio. A Biofilm neighbour is freed by shifting biomass and
    mediator one cell along a random walk to free space, then receives fr_spr C_bio with the
    origin's M_ox. A Biofilm neighbour whose only way out is the origin is skipped and the
    direction drawn again. Biomass and mediator mass are conserved exactly.

    :raises BiofilmClogError: when no free space can be reached within ``max_walk_steps``
        (10 x lattice perimeter by default)
    """
    _check_shapes(lattice, state)
    if max_walk_steps is None:
        max_walk_steps = 10 * 2 * (lattice.width + lattice.height)
    lattice = lattice.copy()
    state = state.copy()
    concentration = state.concentration
    m_ox = state.m_ox
    max_passes = 10 * concentration.size
    for _ in range(max_passes):
        above = np.argwhere(concentration > params.max_concentration)
        if above.size == 0:
            return lattice, state
        origin = (int(above[0][0]), int(above[0][1]))
        target, walk = _draw_target(lattice, origin, rng, max_walk_steps)
        if walk is not None:
            path, free = walk
            lattice.kinds[free] = CellKind.BIOFILM.value
            for destination, source in zip([free] + path[::-1], path[::-1]):
                concentration[destination] = concentration[source]
                m_ox[destination] = m_ox[source]
        else:
            lattice.kinds[target] = CellKind.BIOFILM.value
        transferred = params.spread_fraction * concentration[origin]
        concentration[target] = transferred
        m_ox[target] = m_ox[origin]
        concentration[origin] -= transferred
    msg = "Biofilm clogged: spreading did not bring every cell below the threshold"
    logger.warning(msg)
    raise BiofilmClogError(msg)
