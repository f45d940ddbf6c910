from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Tuple

import numpy as np

from . import get_logger
from .biofilm import BiofilmState, attach, grow, spread
from .config import SimulationConfig
from .electrochem import (
    ElectroParams,
    evaluate_circuit,
    mediator_aggregate,
    monod_rate,
    update_mediator,
)
from .exceptions import BiofilmClogError, NonConvergenceError, NumericalBlowupError
from .grid import (
    Lattice,
    UnitScales,
    generate_random_electrode,
    is_percolating,
    load_geometry_file,
)
from .lbm_model.advection_diffusion import (
    AdeParameters,
    Advection,
    ScalarState,
    run_to_steady_ade,
)
from .lbm_model.flow import FlowParameters, FlowState, run_to_steady
from .types_for_mfc import CellKind, ElectricalRecord, TerminationStatus

logger = get_logger(__name__)


@dataclass(frozen=True)
class HourConvergence:
    hour: int
    flow_steps: int
    flow_residual: float
    ade_steps: int
    ade_residual: float
    clamped_cells: int
    biofilm_cells: int


@dataclass
class SimulationState:
    """Everything needed to continue a run at an hour boundary

    Attributes:
        hour: number of completed hours
        lattice: cell kinds after the last biofilm update
        biofilm: biomass and mediator per cell
        substrate: C_s field of the last completed hour, mg/L
        rng: the single random stream of the run
        flow: converged flow distributions of the last hour, warm start of the next
        scalar: converged scalar distributions of the last hour, warm start of the next
        records: one ElectricalRecord per completed hour
        convergence: solver metadata per completed hour
        clog_reason: set when the last biofilm update clogged the anode
    """

    hour: int
    lattice: Lattice
    biofilm: BiofilmState
    substrate: np.ndarray
    rng: np.random.Generator
    flow: Optional[FlowState] = None
    scalar: Optional[ScalarState] = None
    records: List[ElectricalRecord] = field(default_factory=list)
    convergence: List[HourConvergence] = field(default_factory=list)
    clog_reason: Optional[str] = None


@dataclass
class SimulationResult:
    records: List[ElectricalRecord]
    convergence: List[HourConvergence]
    status: TerminationStatus
    final_state: SimulationState
    message: str = ""


@dataclass(frozen=True)
class SimulationContext:
    config: SimulationConfig
    scales: UnitScales
    flow_parameters: FlowParameters
    ade_parameters: AdeParameters

    @classmethod
    def for_lattice(cls, config: SimulationConfig, lattice: Lattice) -> "SimulationContext":
        scales = config.unit_scales(n_cells=lattice.width * lattice.height)
        return cls(
            config=config,
            scales=scales,
            flow_parameters=config.flow_parameters(scales),
            ade_parameters=config.ade_parameters(scales),
        )


class HourObserver(Protocol):
    def on_hour(self, state: SimulationState, context: SimulationContext, snapshot: bool) -> None:
        ...

    def on_finish(self, result: SimulationResult, context: SimulationContext) -> None:
        ...


def build_lattice(config: SimulationConfig) -> Lattice:
    if config.lattice.geometry is not None:
        return load_geometry_file(config.lattice.geometry, dx_mm=config.lattice.dx_mm)
    return generate_random_electrode(
        width=config.lattice.width,
        height=config.lattice.height,
        target_porosity=config.lattice.porosity,
        seed=config.lattice.seed,
        dx_mm=config.lattice.dx_mm,
    )


def build_initial_state(
    config: SimulationConfig, lattice: Optional[Lattice] = None
) -> SimulationState:
    """
    Hour 0 state: the electrode geometry, biofilm cells of a loaded mask at C_0^bio with an
    oxidised mediator, and the inlet concentration in the pore space.
    """
    if lattice is None:
        lattice = build_lattice(config)
    biofilm = BiofilmState.empty(lattice.shape)
    preset = lattice.is_kind(CellKind.BIOFILM)
    biofilm.concentration[preset] = config.biofilm.initial_concentration
    biofilm.m_ox[preset] = config.electro.m_total
    substrate = np.where(lattice.scalar_obstacles, 0.0, config.ade.inlet_concentration)
    return SimulationState(
        hour=0,
        lattice=lattice,
        biofilm=biofilm,
        substrate=substrate,
        rng=np.random.default_rng(config.run.seed),
    )


def substrate_sink(
    biofilm: BiofilmState, substrate: np.ndarray, electro: ElectroParams
) -> np.ndarray:
    """Substrate consumption q_a C_bio in mg/(L s); zero outside the biofilm"""
    uptake = monod_rate(np.maximum(substrate, 0.0), biofilm.m_ox, electro)
    rate = uptake * biofilm.concentration / electro.q_max_time_base_s
    return np.where(biofilm.living, rate, 0.0)


def integrate_electrochemistry(
    biofilm: BiofilmState, substrate: np.ndarray, electro: ElectroParams, cell_volume_l: float
) -> Tuple[BiofilmState, np.ndarray, int]:
    """
    Integrates the mediator over one hour in ``electro.mediator_substeps`` equal steps. Each step
    evaluates q_a on the fixed substrate field, solves the cell current and updates M_ox.

    :return: the new biofilm state, the hour mean q_a field and the number of clamp events
    """
    uptake_sum = np.zeros(biofilm.shape)
    if not biofilm.living.any():
        return biofilm.copy(), uptake_sum, 0
    n_steps = electro.mediator_substeps
    dt_h = 1.0 / n_steps
    substrate = np.maximum(substrate, 0.0)
    clamped = 0
    for _ in range(n_steps):
        uptake = np.where(biofilm.living, monod_rate(substrate, biofilm.m_ox, electro), 0.0)
        circuit = evaluate_circuit(mediator_aggregate(biofilm, cell_volume_l, electro), electro)
        update = update_mediator(biofilm, uptake, circuit.current_a, electro, dt_h, cell_volume_l)
        biofilm = update.state
        clamped += update.clamped_cells
        uptake_sum += uptake
    return biofilm, uptake_sum / n_steps, clamped


def _mean_substrate(lattice: Lattice, substrate: np.ndarray) -> float:
    open_cells = ~lattice.scalar_obstacles
    if not open_cells.any():
        return 0.0
    return float(substrate[open_cells].mean())


def step_hour(state: SimulationState, context: SimulationContext) -> SimulationState:
    """
    One outer iteration: steady flow on the current obstacle set, steady substrate transport with
    the biofilm sink, the electrochemical update and the biofilm update (attach, grow, spread).

    :raises NonConvergenceError: when a lattice Boltzmann solve does not reach steady state
    :raises NumericalBlowupError: when a lattice Boltzmann solve becomes unstable
    """
    config = context.config
    electro = config.electro
    lattice = state.lattice
    cell_volume_l = context.scales.cell_volume_l

    flow = run_to_steady(lattice, context.flow_parameters, initial=state.flow)
    advection = Advection.from_flow(
        lattice, flow.state, context.scales.flow_to_ade_velocity_factor
    )
    sink = substrate_sink(state.biofilm, state.substrate, electro)
    transport = run_to_steady_ade(
        lattice, advection, sink, context.ade_parameters, initial=state.scalar
    )
    substrate = transport.concentration

    biofilm, uptake, clamped = integrate_electrochemistry(
        state.biofilm, substrate, electro, cell_volume_l
    )
    if clamped > 0:
        logger.warning(f"Hour {state.hour}: mediator clamped {clamped} times")
    aggregate = mediator_aggregate(biofilm, cell_volume_l, electro)
    circuit = evaluate_circuit(aggregate, electro)
    record = ElectricalRecord(
        hour=state.hour,
        current_a=circuit.current_a,
        voltage_v=circuit.voltage_v,
        n_conc_v=circuit.n_conc_v,
        n_act_v=circuit.n_act_v,
        m_red_fraction=aggregate.m_red_fraction,
        m_ox_fraction=aggregate.m_ox_fraction,
        total_biomass_mg=aggregate.total_biomass_mg,
        mean_substrate_mg_per_l=_mean_substrate(lattice, substrate),
    )

    new_lattice, biofilm = attach(lattice, biofilm, config.biofilm, state.rng, electro.m_total)
    biofilm = grow(biofilm, substrate, electro, config.biofilm, dt_h=1.0, uptake_rate=uptake)
    clog_reason = None
    try:
        new_lattice, biofilm = spread(new_lattice, biofilm, config.biofilm, state.rng)
    except BiofilmClogError as err:
        clog_reason = str(err)
    if clog_reason is None and not is_percolating(new_lattice):
        clog_reason = "Biofilm clogged: no fluid path joins the inlet to the outlet"
        logger.warning(clog_reason)

    convergence = HourConvergence(
        hour=state.hour,
        flow_steps=flow.convergence.steps,
        flow_residual=flow.convergence.residual,
        ade_steps=transport.convergence.steps,
        ade_residual=transport.convergence.residual,
        clamped_cells=clamped,
        biofilm_cells=biofilm.n_cells,
    )
    logger.info(
        f"Hour {state.hour}: I = {record.current_a * 1e3:.4f} mA, "
        f"V = {record.voltage_v * 1e3:.2f} mV, biofilm cells = {biofilm.n_cells}"
    )
    return SimulationState(
        hour=state.hour + 1,
        lattice=new_lattice,
        biofilm=biofilm,
        substrate=substrate,
        rng=state.rng,
        flow=flow.state,
        scalar=transport.state,
        records=state.records + [record],
        convergence=state.convergence + [convergence],
        clog_reason=clog_reason,
    )


def snapshot_due(hour: int, snapshot_every: int, last: bool) -> bool:
    """Snapshots at hours 0, n, 2n, ... and always at the last hour of a run"""
    if last:
        return True
    return snapshot_every > 0 and hour % snapshot_every == 0


def run_simulation(
    config: SimulationConfig,
    observer: Optional[HourObserver] = None,
    initial_state: Optional[SimulationState] = None,
) -> SimulationResult:
    """
    Runs the hourly loop until ``config.run.hours`` hours are completed, the biofilm clogs the
    anode or a lattice Boltzmann solve fails. Records of completed hours are always returned.

    :param config: SimulationConfig
    :param observer: receives every completed hour and the final result
    :param initial_state: state to resume from, hour 0 of a new run if None
    :return: SimulationResult
    """
    state = initial_state if initial_state is not None else build_initial_state(config)
    context = SimulationContext.for_lattice(config, state.lattice)
    status = TerminationStatus.COMPLETED
    message = ""
    if state.clog_reason is not None:
        status = TerminationStatus.CLOGGED
        message = state.clog_reason
    while status == TerminationStatus.COMPLETED and state.hour < config.run.hours:
        try:
            state = step_hour(state, context)
        except (NonConvergenceError, NumericalBlowupError) as err:
            status = TerminationStatus.NON_CONVERGED
            message = str(err)
            logger.error(f"Run stopped at hour {state.hour}: {message}")
            break
        if state.clog_reason is not None:
            status = TerminationStatus.CLOGGED
            message = state.clog_reason
            logger.warning(f"Run stopped after hour {state.hour - 1}: {message}")
        if observer is not None:
            last = status != TerminationStatus.COMPLETED or state.hour >= config.run.hours
            observer.on_hour(
                state, context, snapshot_due(state.hour - 1, config.run.snapshot_every, last)
            )
    result = SimulationResult(
        records=list(state.records),
        convergence=list(state.convergence),
        status=status,
        final_state=state,
        message=message,
    )
    if observer is not None:
        observer.on_finish(result, context)
    return result

