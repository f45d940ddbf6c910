"""Checkpoint container for a run at an hour boundary.

A checkpoint is a numpy ``.npz`` archive holding every field of the state plus a JSON metadata
entry (format version, hour, random generator state, records and convergence history).
"""

from dataclasses import asdict
from typing import Any, Dict, Union
import json
import os

import numpy as np

from . import get_logger
from .biofilm import BiofilmState
from .exceptions import InputError
from .grid import Lattice
from .lbm_model.advection_diffusion import ScalarState
from .lbm_model.flow import FlowState
from .runsimulation import HourConvergence, SimulationState
from .types_for_mfc import ElectricalRecord

logger = get_logger(__name__)

CHECKPOINT_FORMAT = "mfc-lbm-checkpoint"
CHECKPOINT_VERSION = 1


def _metadata(state: SimulationState) -> Dict[str, Any]:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "hour": state.hour,
        "dx_mm": state.lattice.dx_mm,
        "flow_tau": None if state.flow is None else state.flow.tau,
        "tau_d": None if state.scalar is None else state.scalar.tau_d,
        "rng": state.rng.bit_generator.state,
        "records": [record.to_dict() for record in state.records],
        "convergence": [asdict(item) for item in state.convergence],
        "clog_reason": state.clog_reason,
    }


def save_checkpoint(state: SimulationState, path: Union[str, os.PathLike]) -> None:
    arrays: Dict[str, np.ndarray] = {
        "kinds": state.lattice.kinds,
        "biomass": state.biofilm.concentration,
        "m_ox": state.biofilm.m_ox,
        "substrate": state.substrate,
        "metadata": np.array(json.dumps(_metadata(state))),
    }
    if state.flow is not None:
        arrays.update(
            flow_f=state.flow.f,
            flow_rho=state.flow.rho,
            flow_ux=state.flow.ux,
            flow_uy=state.flow.uy,
        )
    if state.scalar is not None:
        arrays.update(scalar_g=state.scalar.g, scalar_concentration=state.scalar.concentration)
    try:
        with open(path, "wb") as file:
            np.savez(file, **arrays)
    except OSError as err:
        msg = f"Could not write checkpoint {path}: {err}"
        logger.error(msg)
        raise InputError(msg) from err
    logger.info(f"Checkpoint after hour {state.hour} written to {path}")


def _restore_rng(rng_state: Dict[str, Any]) -> np.random.Generator:
    try:
        bit_generator = getattr(np.random, rng_state["bit_generator"])()
    except (KeyError, AttributeError) as err:
        msg = f"Unknown random generator in checkpoint: {rng_state.get('bit_generator')}"
        logger.error(msg)
        raise InputError(msg) from err
    bit_generator.state = rng_state
    return np.random.Generator(bit_generator)


def load_checkpoint(path: Union[str, os.PathLike]) -> SimulationState:
    """
    Reads a checkpoint written by ``save_checkpoint``.

    :raises InputError: if the file is missing or is not a checkpoint of a known version
    """
    if not os.path.isfile(path):
        msg = f"Checkpoint file not found: {path}"
        logger.error(msg)
        raise InputError(msg)
    try:
        with np.load(path, allow_pickle=False) as archive:
            arrays = {name: archive[name] for name in archive.files}
    except (OSError, ValueError) as err:
        msg = f"Could not read checkpoint {path}: {err}"
        logger.error(msg)
        raise InputError(msg) from err
    if "metadata" not in arrays:
        msg = f"{path} is not a checkpoint: metadata entry missing"
        logger.error(msg)
        raise InputError(msg)
    metadata = json.loads(str(arrays["metadata"]))
    known = metadata.get("format") == CHECKPOINT_FORMAT
    if not known or metadata.get("version") != CHECKPOINT_VERSION:
        msg = (
            f"{path}: unsupported checkpoint format {metadata.get('format')} "
            f"version {metadata.get('version')}"
        )
        logger.error(msg)
        raise InputError(msg)

    flow = None
    if "flow_f" in arrays:
        flow = FlowState(
            f=arrays["flow_f"],
            rho=arrays["flow_rho"],
            ux=arrays["flow_ux"],
            uy=arrays["flow_uy"],
            tau=metadata["flow_tau"],
        )
    scalar = None
    if "scalar_g" in arrays:
        scalar = ScalarState(
            g=arrays["scalar_g"],
            concentration=arrays["scalar_concentration"],
            tau_d=metadata["tau_d"],
        )
    return SimulationState(
        hour=metadata["hour"],
        lattice=Lattice(kinds=arrays["kinds"], dx_mm=metadata["dx_mm"]),
        biofilm=BiofilmState(concentration=arrays["biomass"], m_ox=arrays["m_ox"]),
        substrate=arrays["substrate"],
        rng=_restore_rng(metadata["rng"]),
        flow=flow,
        scalar=scalar,
        records=[ElectricalRecord(**record) for record in metadata["records"]],
        convergence=[HourConvergence(**item) for item in metadata["convergence"]],
        clog_reason=metadata["clog_reason"],
    )
