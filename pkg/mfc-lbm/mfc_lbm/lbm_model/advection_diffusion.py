"""Lattice Boltzmann solver for substrate advection-diffusion over a frozen flow field.

The populations G_i carry concentration (mg/L). Electrode solids and walls reflect G_i
(zero flux), biofilm cells stay open for diffusion but are not advected and consume substrate.

The equilibrium is G_i^eq = C_s (W_i + a_i), with the advective part a_i taken from the mass the
converged flow moves along each link. The non-equilibrium part is projected onto its first moment
before relaxation (regularised BGK). With both, a uniform inflow concentration is an exact steady
state for every tau_d, and the diffusivity stays (tau_d - 1/2) / 3.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .d2q9 import D2Q9, BounceBackLinks, equilibrium, moments
from .flow import FlowState, collide
from .utility import ConvergenceInfo, iterate_to_steady
from .. import get_logger
from ..constant import low_mach_velocity_limit, stable_relaxation_time
from ..exceptions import InputError, InstabilityError
from ..grid import Lattice
from ..types_for_mfc import CellKind

logger = get_logger(__name__)

_WEIGHTS = D2Q9.weights.reshape(-1, 1, 1)
_CX = D2Q9.cx.reshape(-1, 1, 1)
_CY = D2Q9.cy.reshape(-1, 1, 1)


@dataclass(kw_only=True)
class AdeParameters:
    """
    Attributes:
        tau_d: dimensionless relaxation time of the scalar populations, > 0.5
        inlet_concentration: Dirichlet substrate concentration C_in at the inlet in mg/L
        dt_s: physical time of one ADE step in s, scales the sink
        tolerance: relative L2 change of C_s between checks that counts as steady
        check_every: steps between convergence checks
        max_steps: step budget of one steady solve
        negative_tolerance: most negative concentration accepted (and clamped) before a step is
            declared unstable. None lets the field take any sign and skips the clamp.
        overshoot_tolerance: relative excess over the largest concentration fed into the domain
            (C_in or the initial maximum) that is declared unstable. None disables the check.
    """

    tau_d: float = 0.5036
    inlet_concentration: float = 410.0
    dt_s: float = 1.0
    tolerance: float = 1e-8
    check_every: int = 100
    max_steps: int = 200_000
    negative_tolerance: Optional[float] = 1e-9
    overshoot_tolerance: Optional[float] = 2e-2

    def __post_init__(self):
        if self.tau_d <= stable_relaxation_time:
            msg = f"The relaxation time tau_d must be greater than 0.5, got {self.tau_d}"
            logger.error(msg)
            raise InputError(msg)
        if self.inlet_concentration < 0:
            msg = f"The inlet concentration must be non-negative, got {self.inlet_concentration}"
            logger.error(msg)
            raise InputError(msg)
        if self.dt_s <= 0:
            msg = f"The ADE time step must be positive, got {self.dt_s}"
            logger.error(msg)
            raise InputError(msg)
        if self.overshoot_tolerance is not None and self.overshoot_tolerance <= 0:
            msg = f"The overshoot tolerance must be positive, got {self.overshoot_tolerance}"
            logger.error(msg)
            raise InputError(msg)

    @property
    def diffusivity(self) -> float:
        """Lattice diffusivity (tau_d - 1/2) / 3"""
        return (self.tau_d - 0.5) / 3


@dataclass
class Advection:
    """
    Equilibrium weights W_i + a_i per cell, shape (9, Ly, Lx). They sum to one in every cell and
    their first moment is the advecting velocity in ADE lattice units.
    """

    weights: np.ndarray

    @classmethod
    def at_rest(cls, shape: Tuple[int, int]) -> "Advection":
        return cls(weights=np.broadcast_to(_WEIGHTS, (len(D2Q9),) + tuple(shape)).copy())

    @classmethod
    def from_velocity(cls, lattice: Lattice, ux: np.ndarray, uy: np.ndarray) -> "Advection":
        """
        Second order equilibrium weights of a cell velocity field (ADE lattice units). Biofilm and
        other flow obstacles do not advect.
        """
        moving = ~lattice.flow_obstacles
        ux = np.where(moving, ux, 0.0)
        uy = np.where(moving, uy, 0.0)
        advection = cls(weights=equilibrium(np.ones(lattice.shape), ux, uy))
        advection.check(lattice)
        return advection

    @classmethod
    def from_flow(
        cls, lattice: Lattice, flow: FlowState, flow_to_ade_factor: float
    ) -> "Advection":
        """
        Advective weights from the converged flow: ``a_i = s / 2 (F*_i(x) - F*_opp(x + c_i))``,
        the net mass the flow moves along link i per step, with F* the post-collision flow
        populations and s = dt_ade / dt_flow. Links touching a flow obstacle carry nothing, so
        biofilm cells are purely diffusive. Links across the inlet/outlet seam are cut, and the
        rest weight absorbs the remainder so every cell sums to one.
        """
        post = collide(flow, lattice)
        open_cells = ~lattice.flow_obstacles
        advective = np.zeros_like(post)
        for i, (cx, cy) in enumerate(D2Q9.velocities):
            if i == 0:
                continue
            ahead = np.roll(post[D2Q9.opposite[i]], shift=(-cy, -cx), axis=(0, 1))
            linked = open_cells & np.roll(open_cells, shift=(-cy, -cx), axis=(0, 1))
            if lattice.has_ports and cx != 0:
                linked[:, -1 if cx == 1 else 0] = False
            advective[i] = np.where(linked, 0.5 * flow_to_ade_factor * (post[i] - ahead), 0.0)
        advective[0] = -advective[1:].sum(axis=0)
        advection = cls(weights=_WEIGHTS + advective)
        advection.check(lattice)
        return advection

    @property
    def velocity(self) -> Tuple[np.ndarray, np.ndarray]:
        _, ux, uy = moments(self.weights)
        return ux, uy

    def check(self, lattice: Lattice) -> None:
        """
        :raises InstabilityError: when a weight of a transported cell is negative, i.e. the
            advecting flux is too large for one ADE step
        """
        if self.weights.shape != (len(D2Q9),) + lattice.shape:
            msg = f"Advection weights {self.weights.shape} do not fit the lattice {lattice.shape}"
            logger.error(msg)
            raise InputError(msg)
        speed = np.hypot(*self.velocity)
        if speed.size > 0 and speed.max() > low_mach_velocity_limit:
            logger.warning(
                f"Advecting velocity reaches {speed.max():.3f} in ADE lattice units, above "
                f"{low_mach_velocity_limit}; the advection-diffusion solve may be inaccurate"
            )
        negative = ~lattice.scalar_obstacles & (self.weights < 0.0).any(axis=0)
        if negative.any():
            y, x = np.argwhere(negative)[0]
            msg = (
                f"Advection-diffusion solver unstable: advecting flux at cell (x={x}, y={y}) "
                f"exceeds what one ADE step can carry. Reduce the ADE time step."
            )
            logger.error(msg)
            raise InstabilityError(msg, cell=(int(x), int(y)))


def _seated(
    lattice: Lattice, concentration: np.ndarray, advection: Advection, links: BounceBackLinks
) -> np.ndarray:
    """
    Populations a steady field would stream into each cell, scaled to the given C_s. Inlet and
    outlet cells hold their equilibrium, as after a boundary update.
    """
    at_equilibrium = concentration * advection.weights
    g = links.propagate(at_equilibrium)
    total = g.sum(axis=0)
    scale = np.ones_like(total)
    np.divide(concentration, total, out=scale, where=total != 0.0)
    seated = (total != 0.0) & ~lattice.is_kind(CellKind.INLET, CellKind.OUTLET)
    return np.where(seated, g * scale, at_equilibrium)


@dataclass
class ScalarState:
    g: np.ndarray
    concentration: np.ndarray
    tau_d: float

    @classmethod
    def uniform(
        cls,
        lattice: Lattice,
        concentration: float,
        tau_d: float,
        advection: Optional[Advection] = None,
    ) -> "ScalarState":
        """Uniform concentration in every cell open to transport, steady under ``advection``"""
        c = np.where(~lattice.scalar_obstacles, float(concentration), 0.0)
        return cls.from_concentration(lattice, c, tau_d, advection)

    @classmethod
    def from_concentration(
        cls,
        lattice: Lattice,
        concentration: np.ndarray,
        tau_d: float,
        advection: Optional[Advection] = None,
    ) -> "ScalarState":
        """Equilibrium at rest, or the populations seated on ``advection`` when one is given"""
        c = np.where(~lattice.scalar_obstacles, np.asarray(concentration, dtype=float), 0.0)
        if advection is None:
            return cls(g=equilibrium(c, 0.0, 0.0), concentration=c, tau_d=tau_d)
        g = _seated(lattice, c, advection, BounceBackLinks(lattice.scalar_obstacles))
        return cls(g=g, concentration=c, tau_d=tau_d)

    def copy(self) -> "ScalarState":
        return ScalarState(
            g=self.g.copy(), concentration=self.concentration.copy(), tau_d=self.tau_d
        )

    @property
    def total_mass(self) -> float:
        return float(self.g.sum())


@dataclass
class ConcentrationField:
    concentration: np.ndarray
    convergence: ConvergenceInfo
    state: ScalarState


def _check_sink(lattice: Lattice, sink: np.ndarray) -> None:
    if sink.shape != lattice.shape:
        msg = f"Sink field shape {sink.shape} does not match the lattice {lattice.shape}"
        logger.error(msg)
        raise InputError(msg)
    if (sink < 0).any():
        msg = "The substrate sink must be non-negative"
        logger.error(msg)
        raise InputError(msg)
    if (sink[~lattice.is_kind(CellKind.BIOFILM)] != 0).any():
        msg = "The substrate sink must be zero outside biofilm cells"
        logger.error(msg)
        raise InputError(msg)


def _raise_unstable(concentration: np.ndarray, unstable: np.ndarray, reason: str) -> None:
    y, x = np.argwhere(unstable)[0]
    msg = (
        f"Advection-diffusion solver unstable: {reason} concentration {concentration[y, x]} "
        f"at cell (x={x}, y={y})"
    )
    logger.error(msg)
    raise InstabilityError(msg, cell=(int(x), int(y)))


def _ceiling(state: ScalarState, params: AdeParameters) -> float:
    return max(params.inlet_concentration, float(state.concentration.max(initial=0.0)))


def _step(
    state: ScalarState,
    lattice: Lattice,
    advection: Advection,
    sink: Optional[np.ndarray],
    params: AdeParameters,
    links: BounceBackLinks,
    ceiling: float,
) -> ScalarState:
    obstacles = lattice.scalar_obstacles
    omega = 1.0 / state.tau_d
    concentration = state.g.sum(axis=0)
    equilibrium_g = concentration * advection.weights
    _, qx, qy = moments(state.g - equilibrium_g)
    post = equilibrium_g + (1.0 - omega) * 3.0 * _WEIGHTS * (_CX * qx + _CY * qy)
    g = links.propagate(post)

    inlet_rows = np.flatnonzero(lattice.kinds[:, 0] == CellKind.INLET.value)
    if inlet_rows.size > 0:
        g[:, inlet_rows, 0] = params.inlet_concentration * advection.weights[:, inlet_rows, 0]
    outlet_rows = np.flatnonzero(lattice.kinds[:, -1] == CellKind.OUTLET.value)
    if outlet_rows.size > 0:
        upstream = g[:, outlet_rows, -2].sum(axis=0)
        g[:, outlet_rows, -1] = upstream * advection.weights[:, outlet_rows, -1]

    concentration = g.sum(axis=0)
    if params.negative_tolerance is not None:
        unstable = ~obstacles & ~(concentration >= -params.negative_tolerance)
        if unstable.any():
            _raise_unstable(concentration, unstable, "negative")
    else:
        unstable = ~np.isfinite(concentration)
        if unstable.any():
            _raise_unstable(concentration, unstable, "non-finite")
    if params.overshoot_tolerance is not None:
        unstable = concentration > ceiling * (1.0 + params.overshoot_tolerance)
        if unstable.any():
            _raise_unstable(concentration, unstable, "overshooting")

    if params.negative_tolerance is None and sink is None:
        return ScalarState(g=g, concentration=concentration, tau_d=state.tau_d)
    target = concentration
    if params.negative_tolerance is not None:
        target = np.maximum(target, 0.0)
    if sink is not None:
        target = np.maximum(target - sink * params.dt_s, 0.0)
    rescale = target != concentration
    if rescale.any():
        ratio = np.zeros_like(concentration)
        np.divide(target, concentration, out=ratio, where=rescale & (concentration != 0.0))
        ratio[~rescale] = 1.0
        g = g * ratio
        concentration = np.where(rescale, target, concentration)
    return ScalarState(g=g, concentration=concentration, tau_d=state.tau_d)


def ade_step(
    state: ScalarState,
    lattice: Lattice,
    advection: Advection,
    sink: Optional[np.ndarray],
    params: AdeParameters,
    links: Optional[BounceBackLinks] = None,
) -> ScalarState:
    """
    One update: regularised BGK collision with tau_d, streaming, zero-flux bounce-back at solids,
    Dirichlet inlet, zero-gradient outlet (equilibrium at the concentration of the column before
    it), then the sink (mg/(L s)) applied for one step with C_s clamped at zero. Populations of a
    cell are rescaled together so their sum stays C_s.

    :raises InstabilityError: if a concentration falls below ``-params.negative_tolerance`` or
        overshoots max(C_in, current maximum) by more than ``params.overshoot_tolerance``
    """
    if sink is not None:
        _check_sink(lattice, sink)
    if links is None:
        links = BounceBackLinks(lattice.scalar_obstacles)
    return _step(state, lattice, advection, sink, params, links, _ceiling(state, params))


def run_to_steady_ade(
    lattice: Lattice,
    advection: Advection,
    sink: Optional[np.ndarray],
    params: AdeParameters,
    initial: Optional[ScalarState] = None,
) -> ConcentrationField:
    """
    Iterates ``ade_step`` until the relative L2 change of C_s between two checks is below
    ``params.tolerance``.

    :param lattice: the domain
    :param advection: frozen advective weights, see ``Advection.from_flow``
    :param sink: substrate consumption in mg/(L s), non-zero only at biofilm cells
    :param params: ADE parameters
    :param initial: previous state for a warm start, uniform C_in if None. Its concentration is
        re-seated on ``advection``.
    :return: ConcentrationField
    """
    if sink is not None:
        _check_sink(lattice, sink)
    if initial is None:
        current = ScalarState.uniform(lattice, params.inlet_concentration, params.tau_d, advection)
    else:
        current = ScalarState.from_concentration(
            lattice, initial.concentration, params.tau_d, advection
        )
    links = BounceBackLinks(lattice.scalar_obstacles)
    ceiling = _ceiling(current, params)

    def advance(n_steps: int) -> None:
        nonlocal current
        for _ in range(n_steps):
            current = _step(current, lattice, advection, sink, params, links, ceiling)

    def observe() -> Tuple[np.ndarray]:
        return (current.concentration,)

    convergence = iterate_to_steady(
        advance=advance,
        observe=observe,
        tolerance=params.tolerance,
        check_every=params.check_every,
        max_steps=params.max_steps,
        solver_name="Advection-diffusion LBM",
    )
    return ConcentrationField(
        concentration=current.concentration, convergence=convergence, state=current
    )


def concentration_variance(concentration: np.ndarray) -> Tuple[float, float]:
    """Second central moments of a concentration field along x and y"""
    total = concentration.sum()
    y, x = np.indices(concentration.shape)
    mean_x = (x * concentration).sum() / total
    mean_y = (y * concentration).sum() / total
    var_x = (((x - mean_x) ** 2) * concentration).sum() / total
    var_y = (((y - mean_y) ** 2) * concentration).sum() / total
    return float(var_x), float(var_y)
