"""BGK lattice Boltzmann solver for the steady pore-scale flow field.

Electrode solids, biofilm and walls are impermeable (half-way bounce-back). The inlet column
imposes a velocity by equilibrium refill. The outlet column copies its interior neighbour
rescaled to unit density, which anchors the pressure level of the domain.
A lattice without inlet/outlet columns is periodic along x.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .d2q9 import D2Q9, BounceBackLinks, equilibrium, moments, forcing_term, stream
from .utility import ConvergenceInfo, iterate_to_steady
from .. import get_logger
from ..constant import low_mach_velocity_limit, stable_relaxation_time
from ..exceptions import InputError, NumericalBlowupError, PercolationError
from ..grid import Lattice, is_percolating
from ..types_for_mfc import CellKind

logger = get_logger(__name__)

__all__ = [
    "FlowParameters",
    "FlowState",
    "FlowField",
    "equilibrium",
    "collide",
    "collide_and_stream",
    "apply_bounce_back",
    "apply_inlet_outlet",
    "macroscopic",
    "step",
    "run_to_steady",
    "column_mass_flux",
]


@dataclass(kw_only=True)
class FlowParameters:
    """
    Attributes:
        tau: dimensionless relaxation time, > 0.5
        inlet_velocity: inflow velocity in flow lattice units
        tolerance: relative L2 change of u and rho between checks that counts as steady
        check_every: steps between convergence checks
        max_steps: step budget of one steady solve
        body_force: uniform body force (lattice units), Guo forcing
    """

    tau: float = 0.6706
    inlet_velocity: float = 0.0
    tolerance: float = 1e-8
    check_every: int = 100
    max_steps: int = 200_000
    body_force: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.tau <= stable_relaxation_time:
            msg = f"The relaxation time tau must be greater than 0.5 for stability, got {self.tau}"
            logger.error(msg)
            raise InputError(msg)
        if abs(self.inlet_velocity) >= 0.1:
            msg = (
                f"The inlet velocity must be below 0.1 in lattice units, got "
                f"{self.inlet_velocity}. Refine the time step."
            )
            logger.error(msg)
            raise InputError(msg)

    @property
    def viscosity(self) -> float:
        return (self.tau - 0.5) / 3


@dataclass
class FlowState:
    """Distributions F_i (9, Ly, Lx) with the macroscopic fields of the latest moment update"""

    f: np.ndarray
    rho: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    tau: float
    post_collision: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def at_rest(cls, lattice: Lattice, tau: float) -> "FlowState":
        """rho = 1, u = 0 and F_i = W_i in the pore space, zero inside obstacles"""
        open_cells = ~lattice.flow_obstacles
        f = D2Q9.weights.reshape(-1, 1, 1) * open_cells.astype(float)
        return cls(
            f=f,
            rho=open_cells.astype(float),
            ux=np.zeros(lattice.shape),
            uy=np.zeros(lattice.shape),
            tau=tau,
        )

    def adapted_to(self, lattice: Lattice) -> "FlowState":
        """Copy for a changed obstacle set: new obstacles are emptied, new open cells at rest"""
        obstacles = lattice.flow_obstacles
        f = self.f.copy()
        f[:, obstacles] = 0.0
        empty = ~obstacles & (f.sum(axis=0) <= 0.0)
        f[:, empty] = D2Q9.weights.reshape(-1, 1)
        return FlowState(
            f=f, rho=f.sum(axis=0), ux=self.ux.copy(), uy=self.uy.copy(), tau=self.tau
        )

    def copy(self) -> "FlowState":
        return FlowState(
            f=self.f.copy(),
            rho=self.rho.copy(),
            ux=self.ux.copy(),
            uy=self.uy.copy(),
            tau=self.tau,
        )

    @property
    def total_mass(self) -> float:
        return float(self.f.sum())


@dataclass
class FlowField:
    rho: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    convergence: ConvergenceInfo
    state: FlowState

    @property
    def speed(self) -> np.ndarray:
        return np.hypot(self.ux, self.uy)


def collide(
    state: FlowState, lattice: Lattice, body_force: Tuple[float, float] = (0.0, 0.0)
) -> np.ndarray:
    """BGK relaxation towards the local equilibrium at every open cell; obstacles stay empty"""
    open_cells = ~lattice.flow_obstacles
    rho, jx, jy = moments(state.f)
    safe_rho = np.where(open_cells, rho, 1.0)
    ux = np.where(open_cells, (jx + 0.5 * body_force[0]) / safe_rho, 0.0)
    uy = np.where(open_cells, (jy + 0.5 * body_force[1]) / safe_rho, 0.0)
    post = state.f - (state.f - equilibrium(rho, ux, uy)) / state.tau
    if body_force[0] != 0.0 or body_force[1] != 0.0:
        post += forcing_term(ux, uy, body_force, state.tau)
    post[:, ~open_cells] = 0.0
    return post


def collide_and_stream(
    state: FlowState, lattice: Lattice, body_force: Tuple[float, float] = (0.0, 0.0)
) -> FlowState:
    """
    Collision followed by streaming into a fresh buffer. The post-collision buffer is kept on the
    returned state for ``apply_bounce_back``.
    """
    post = collide(state, lattice, body_force)
    return FlowState(
        f=stream(post),
        rho=state.rho,
        ux=state.ux,
        uy=state.uy,
        tau=state.tau,
        post_collision=post,
    )


def apply_bounce_back(
    state: FlowState, lattice: Lattice, links: Optional[BounceBackLinks] = None
) -> FlowState:
    """
    Half-way bounce-back: populations that streamed into an obstacle return to their cell of
    origin along the opposite direction (south wall: F_5 <- F_7, F_2 <- F_4, F_6 <- F_8).
    """
    if links is None:
        links = BounceBackLinks(lattice.flow_obstacles)
    if state.post_collision is None:
        msg = "Bounce-back needs the post-collision populations of the last collide_and_stream"
        logger.error(msg)
        raise InputError(msg)
    return FlowState(
        f=links.apply(state.post_collision, state.f),
        rho=state.rho,
        ux=state.ux,
        uy=state.uy,
        tau=state.tau,
        post_collision=state.post_collision,
    )


def apply_inlet_outlet(state: FlowState, lattice: Lattice, inflow_velocity: float) -> FlowState:
    """
    Inlet cells are refilled with the equilibrium at u = (inflow_velocity, 0) and the density of
    their interior neighbour. Outlet cells copy the populations of the column before them scaled
    to rho = 1 (rest equilibrium where that column is empty), so the mean density cannot drift.
    """
    f = state.f.copy()
    inlet_rows = np.flatnonzero(lattice.kinds[:, 0] == CellKind.INLET.value)
    if inlet_rows.size > 0:
        rho_in = f[:, inlet_rows, 1].sum(axis=0)
        rho_in = np.where(rho_in > 0.0, rho_in, 1.0)
        f[:, inlet_rows, 0] = equilibrium(rho_in, inflow_velocity, 0.0)
    outlet_rows = np.flatnonzero(lattice.kinds[:, -1] == CellKind.OUTLET.value)
    if outlet_rows.size > 0:
        upstream = f[:, outlet_rows, -2]
        rho_out = upstream.sum(axis=0)
        anchored = upstream / np.where(rho_out > 0.0, rho_out, 1.0)
        f[:, outlet_rows, -1] = np.where(rho_out > 0.0, anchored, D2Q9.weights.reshape(-1, 1))
    return FlowState(
        f=f,
        rho=state.rho,
        ux=state.ux,
        uy=state.uy,
        tau=state.tau,
        post_collision=state.post_collision,
    )


def macroscopic(
    state: FlowState, lattice: Lattice, body_force: Tuple[float, float] = (0.0, 0.0)
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Density and velocity per cell; velocity is zero at obstacle cells.

    :raises NumericalBlowupError: on a non-positive or non-finite density in the pore space
    """
    open_cells = ~lattice.flow_obstacles
    rho, jx, jy = moments(state.f)
    bad = open_cells & ~(np.isfinite(rho) & (rho > 0.0))
    if bad.any():
        y, x = np.argwhere(bad)[0]
        msg = f"Flow solver blew up: density {rho[y, x]} at cell (x={x}, y={y})"
        logger.error(msg)
        raise NumericalBlowupError(msg, cell=(int(x), int(y)))
    safe_rho = np.where(open_cells, rho, 1.0)
    ux = np.where(open_cells, (jx + 0.5 * body_force[0]) / safe_rho, 0.0)
    uy = np.where(open_cells, (jy + 0.5 * body_force[1]) / safe_rho, 0.0)
    return rho, ux, uy


def step(
    state: FlowState,
    lattice: Lattice,
    params: FlowParameters,
    links: Optional[BounceBackLinks] = None,
) -> FlowState:
    """
    One full update: collide, stream, bounce-back, inlet/outlet. Streaming and bounce-back run as
    one gather and give the same populations as ``collide_and_stream`` + ``apply_bounce_back``.
    """
    if links is None:
        links = BounceBackLinks(lattice.flow_obstacles)
    post = collide(state, lattice, params.body_force)
    state = FlowState(
        f=links.propagate(post), rho=state.rho, ux=state.ux, uy=state.uy, tau=state.tau
    )
    if lattice.has_ports:
        state = apply_inlet_outlet(state, lattice, params.inlet_velocity)
    return state


def _check_low_mach(ux: np.ndarray, uy: np.ndarray) -> None:
    speed = np.hypot(ux, uy)
    if speed.max() >= low_mach_velocity_limit:
        y, x = np.unravel_index(np.argmax(speed), speed.shape)
        msg = (
            f"Flow speed {speed[y, x]:.3f} at cell (x={x}, y={y}) exceeds the low Mach limit "
            f"{low_mach_velocity_limit} in lattice units"
        )
        logger.error(msg)
        raise NumericalBlowupError(msg, cell=(int(x), int(y)))


def run_to_steady(
    lattice: Lattice, params: FlowParameters, initial: Optional[FlowState] = None
) -> FlowField:
    """
    Iterates the flow solver until the relative L2 changes of u and of rho between two checks
    are both below ``params.tolerance``.

    :param lattice: the domain, must percolate from inlet to outlet
    :param params: flow parameters
    :param initial: previous state for a warm start, rest state if None
    :return: FlowField with convergence metadata and the final distributions
    """
    if not is_percolating(lattice):
        msg = "domain not percolating: no fluid path joins the inlet to the outlet"
        logger.error(msg)
        raise PercolationError(msg)
    if initial is None:
        state = FlowState.at_rest(lattice, params.tau)
    else:
        state = initial.adapted_to(lattice)
        state.tau = params.tau
    links = BounceBackLinks(lattice.flow_obstacles)
    current = state

    def advance(n_steps: int) -> None:
        nonlocal current
        for _ in range(n_steps):
            current = step(current, lattice, params, links)

    def observe() -> Tuple[np.ndarray, np.ndarray]:
        rho, ux, uy = macroscopic(current, lattice, params.body_force)
        _check_low_mach(ux, uy)
        current.rho, current.ux, current.uy = rho, ux, uy
        return np.stack([ux, uy]), rho

    convergence = iterate_to_steady(
        advance=advance,
        observe=observe,
        tolerance=params.tolerance,
        check_every=params.check_every,
        max_steps=params.max_steps,
        solver_name="Flow LBM",
    )
    return FlowField(
        rho=current.rho, ux=current.ux, uy=current.uy, convergence=convergence, state=current
    )


def column_mass_flux(state: FlowState, lattice: Lattice) -> np.ndarray:
    """
    Net mass crossing each face between interior columns x and x + 1 (x = 1 .. Lx - 3) during
    the last streaming step. Reflected populations never cross a face.
    """
    links = BounceBackLinks(lattice.flow_obstacles)
    f = state.f
    rightward = np.zeros(lattice.shape)
    leftward = np.zeros(lattice.shape)
    for i, cx in enumerate(D2Q9.cx):
        streamed = np.where(links.arrived_by_bounce(i), 0.0, f[i])
        if cx == 1:
            rightward += streamed
        elif cx == -1:
            leftward += streamed
    width = lattice.width
    faces = np.arange(1, width - 2)
    return np.array([rightward[:, x + 1].sum() - leftward[:, x].sum() for x in faces])
