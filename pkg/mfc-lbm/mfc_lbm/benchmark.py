"""Analytic verification of the two lattice Boltzmann solvers.

Poiseuille flow driven by a body force in a periodic channel checks the flow solver and its
second-order convergence. A diffusing step profile and the spreading of a point pulse check the
advection-diffusion solver against D = (tau_d - 1/2) / 3.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence
import math

import numpy as np
from scipy.special import erf

from . import get_logger
from .exceptions import InputError
from .grid import Lattice, make_channel
from .lbm_model.advection_diffusion import (
    AdeParameters,
    Advection,
    ScalarState,
    ade_step,
    concentration_variance,
)
from .lbm_model.d2q9 import BounceBackLinks
from .lbm_model.flow import FlowParameters, run_to_steady
from .types_for_mfc import CellKind

logger = get_logger(__name__)

POISEUILLE_WIDTHS = (16, 32, 64)
PULSE_RELAXATION_TIMES = (0.5036, 1.0, 1.5)
#: Poiseuille run at the reference flow relaxation time
REFERENCE_TAU = 0.6706
#: decay of the initial non-equilibrium flux that counts as gone
_TRANSIENT_DECAY = 1e-10


@dataclass(frozen=True)
class PoiseuilleResult:
    width: int
    l2_error: float
    steps: int


@dataclass(frozen=True)
class DiffusivityResult:
    tau_d: float
    expected: float
    measured: float

    @property
    def relative_error(self) -> float:
        return abs(self.measured - self.expected) / self.expected


@dataclass
class PoiseuilleReport:
    results: List[PoiseuilleResult]

    @property
    def observed_orders(self) -> List[float]:
        """log(e_coarse / e_fine) / log(H_fine / H_coarse) for consecutive widths"""
        return [
            float(np.log(coarse.l2_error / fine.l2_error) / np.log(fine.width / coarse.width))
            for coarse, fine in zip(self.results[:-1], self.results[1:])
        ]


@dataclass
class DiffusionReport:
    step_max_error: float
    pulse: List[DiffusivityResult]


def poiseuille_profile(width: int, force: float, viscosity: float) -> np.ndarray:
    """
    Analytic velocity at the fluid rows 1..width of a channel whose half-way bounce-back walls
    sit at y = 1/2 and y = width + 1/2.
    """
    y = np.arange(1, width + 1, dtype=float)
    return force / (2 * viscosity) * (y - 0.5) * (width + 0.5 - y)


def run_poiseuille(
    width: int,
    tau: float = 1.0,
    u_max: float = 0.01,
    tolerance: float = 1e-9,
    max_steps: int = 400_000,
) -> PoiseuilleResult:
    """
    Body-force driven flow in a periodic channel of ``width`` fluid rows.

    :param width: number of fluid rows H
    :param tau: relaxation time
    :param u_max: centre-line velocity of the analytic profile, lattice units
    :param tolerance: steady-state tolerance of the flow solver
    :param max_steps: step limit of the flow solver
    :return: relative L2 error of u_x against the analytic profile
    """
    if width < 2:
        msg = f"The Poiseuille benchmark needs at least 2 fluid rows, got {width}"
        logger.error(msg)
        raise InputError(msg)
    lattice = make_channel(length=3, width=width, open_ends=False)
    viscosity = (tau - 0.5) / 3
    force = 8 * viscosity * u_max / width**2
    params = FlowParameters(
        tau=tau, tolerance=tolerance, max_steps=max_steps, body_force=(force, 0.0)
    )
    field = run_to_steady(lattice, params)
    analytic = poiseuille_profile(width, force, viscosity)
    simulated = field.ux[1:-1, 1]
    error = float(np.linalg.norm(simulated - analytic) / np.linalg.norm(analytic))
    logger.info(f"Poiseuille H = {width}: relative L2 error {error:.3e}")
    return PoiseuilleResult(width=width, l2_error=error, steps=field.convergence.steps)


def poiseuille_benchmark(
    widths: Sequence[int] = POISEUILLE_WIDTHS, tau: float = 1.0
) -> PoiseuilleReport:
    """Second order convergence study at ``tau`` over ``widths``"""
    return PoiseuilleReport(results=[run_poiseuille(width, tau=tau) for width in widths])


def reference_poiseuille(width: int = POISEUILLE_WIDTHS[0]) -> PoiseuilleResult:
    """Poiseuille flow at the reference relaxation time of the anode runs"""
    return run_poiseuille(width, tau=REFERENCE_TAU)


def _periodic_lattice(height: int, width: int) -> Lattice:
    return Lattice(kinds=np.full((height, width), CellKind.FLUID.value, dtype=np.int8))


def _diffuse(lattice: Lattice, state: ScalarState, n_steps: int) -> ScalarState:
    params = AdeParameters(
        tau_d=state.tau_d,
        inlet_concentration=0.0,
        negative_tolerance=None,
        overshoot_tolerance=None,
    )
    at_rest = Advection.at_rest(lattice.shape)
    links = BounceBackLinks(lattice.scalar_obstacles)
    for _ in range(n_steps):
        state = ade_step(state, lattice, at_rest, None, params, links)
    return state


def step_diffusion_error(length: int = 400, tau_d: float = 1.0, n_steps: int = 1000) -> float:
    """
    Diffuses a unit step occupying the middle half of a periodic line and returns the largest
    deviation from the erf solution.
    """
    lattice = _periodic_lattice(1, length)
    x = np.arange(length, dtype=float)
    left, right = length // 4, 3 * length // 4
    initial = ((x >= left) & (x < right)).astype(float)[np.newaxis, :]
    state = _diffuse(lattice, ScalarState.from_concentration(lattice, initial, tau_d), n_steps)
    spread = np.sqrt(4 * (tau_d - 0.5) / 3 * n_steps)
    analytic = 0.5 * (erf((x - (left - 0.5)) / spread) - erf((x - (right - 0.5)) / spread))
    error = float(np.abs(state.concentration[0] - analytic).max())
    logger.info(f"Step diffusion tau_d = {tau_d}: max error {error:.3e}")
    return error


def transient_steps(tau_d: float) -> int:
    """Steps after which the initial non-equilibrium flux, decaying as |1 - 1/tau_d|^n, is gone"""
    decay = abs(1.0 - 1.0 / tau_d)
    if decay < _TRANSIENT_DECAY:
        return 1
    return math.ceil(math.log(_TRANSIENT_DECAY) / math.log(decay))


def pulse_diffusivity(
    tau_d: float,
    size: Optional[int] = None,
    first_step: Optional[int] = None,
    last_step: Optional[int] = None,
) -> DiffusivityResult:
    """
    Diffusivity from the growth rate of the variance of a point pulse, d(var)/dt = 2 D.

    The growth is measured after the initial flux transient has decayed (at least 200 steps) and
    over 200 steps. The periodic domain spans at least 6 standard deviations of the final pulse
    on each side.
    """
    if first_step is None:
        first_step = max(200, transient_steps(tau_d))
    if last_step is None:
        last_step = first_step + 200
    if size is None:
        spread = math.sqrt(2 * (tau_d - 0.5) / 3 * last_step)
        size = max(41, 2 * math.ceil(6 * spread) + 1)
    if not 0 < first_step < last_step:
        msg = f"Invalid pulse window: first step {first_step}, last step {last_step}"
        logger.error(msg)
        raise InputError(msg)
    lattice = _periodic_lattice(size, size)
    initial = np.zeros(lattice.shape)
    initial[size // 2, size // 2] = 1.0
    first = _diffuse(lattice, ScalarState.from_concentration(lattice, initial, tau_d), first_step)
    last = _diffuse(lattice, first, last_step - first_step)
    growth = np.subtract(
        concentration_variance(last.concentration), concentration_variance(first.concentration)
    )
    measured = float(growth.mean() / (2 * (last_step - first_step)))
    result = DiffusivityResult(tau_d=tau_d, expected=(tau_d - 0.5) / 3, measured=measured)
    logger.info(
        f"Pulse tau_d = {tau_d}: D = {measured:.5f}, expected {result.expected:.5f} "
        f"({result.relative_error:.2%} off)"
    )
    return result


def diffusion_benchmark(
    relaxation_times: Sequence[float] = PULSE_RELAXATION_TIMES,
) -> DiffusionReport:
    return DiffusionReport(
        step_max_error=step_diffusion_error(),
        pulse=[pulse_diffusivity(tau_d) for tau_d in relaxation_times],
    )
