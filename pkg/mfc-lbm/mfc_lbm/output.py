"""On-disk artifacts of a run: hourly time series, field snapshots, greymaps and the manifest."""

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import json
import os
import platform

import numpy as np
import pandas as pd
import scipy

from . import get_logger, __version__
from .checkpoint import save_checkpoint
from .config import SimulationConfig
from .exceptions import InputError
from .grid import Lattice, to_mask
from .runsimulation import SimulationContext, SimulationResult, SimulationState
from .types_for_mfc import ElectricalRecord

logger = get_logger(__name__)

TIMESERIES_FILE = "outputs.csv"
MANIFEST_FILE = "manifest.json"
CHECKPOINT_FILE = "checkpoint.npz"
TIMESERIES_COLUMNS = [
    "hour",
    "I_mA",
    "V_mV",
    "n_conc_V",
    "n_act_V",
    "Mred_frac",
    "Mox_frac",
    "total_biomass_mg",
    "mean_Cs_mgL",
]
_FLOAT_FORMAT = "%.9g"
_GREY_LEVELS = 255

PathLike = Union[str, os.PathLike]


def records_to_frame(records: Sequence[ElectricalRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "hour": [record.hour for record in records],
            "I_mA": [record.current_a * 1e3 for record in records],
            "V_mV": [record.voltage_v * 1e3 for record in records],
            "n_conc_V": [record.n_conc_v for record in records],
            "n_act_V": [record.n_act_v for record in records],
            "Mred_frac": [record.m_red_fraction for record in records],
            "Mox_frac": [record.m_ox_fraction for record in records],
            "total_biomass_mg": [record.total_biomass_mg for record in records],
            "mean_Cs_mgL": [record.mean_substrate_mg_per_l for record in records],
        },
        columns=TIMESERIES_COLUMNS,
    )


def _write_frame(frame: pd.DataFrame, path: PathLike, header: bool) -> None:
    try:
        frame.to_csv(
            path,
            index=False,
            header=header,
            float_format=_FLOAT_FORMAT,
            lineterminator="\n",
            na_rep="nan",
        )
    except OSError as err:
        msg = f"Could not write {path}: {err}"
        logger.error(msg)
        raise


def write_timeseries(records: Sequence[ElectricalRecord], path: PathLike) -> None:
    """Hourly records as CSV with a header row, 9 significant digits and LF line endings"""
    if len(records) == 0:
        msg = "The time series needs at least one record"
        logger.error(msg)
        raise InputError(msg)
    _write_frame(records_to_frame(records), path, header=True)


def write_matrix(matrix: np.ndarray, path: PathLike) -> None:
    """Matrix CSV, one line per lattice row starting at y = 0"""
    _write_frame(pd.DataFrame(np.asarray(matrix, dtype=float)), path, header=False)


def write_greymap(matrix: np.ndarray, path: PathLike) -> Tuple[float, float]:
    """
    Writes an ASCII portable graymap (P2) with min-max normalisation.

    :return: the minimum and maximum mapped to black and white
    """
    values = np.nan_to_num(np.asarray(matrix, dtype=float))
    low, high = float(values.min()), float(values.max())
    if high > low:
        levels = np.rint((values - low) / (high - low) * _GREY_LEVELS).astype(int)
    else:
        levels = np.zeros(values.shape, dtype=int)
    height, width = levels.shape
    lines = ["P2", f"{width} {height}", str(_GREY_LEVELS)]
    lines += [" ".join(str(level) for level in row) for row in levels]
    try:
        with open(path, "wt", newline="\n") as file:
            file.write("\n".join(lines) + "\n")
    except OSError as err:
        msg = f"Could not write {path}: {err}"
        logger.error(msg)
        raise
    return low, high


@dataclass
class SnapshotFiles:
    files: List[str] = field(default_factory=list)
    greymap_ranges: Dict[str, Tuple[float, float]] = field(default_factory=dict)


def write_snapshot(
    fields: Dict[str, np.ndarray],
    lattice: Lattice,
    hour: int,
    out_dir: PathLike,
    greymaps: bool = True,
) -> SnapshotFiles:
    """
    Writes ``<field>_h<hour>.csv`` per field, the cell-kind mask ``geom_h<hour>.txt`` and,
    optionally, ``<field>_h<hour>.pgm`` greymaps.

    :return: names of the files written (relative to ``out_dir``) and the greymap ranges
    """
    for name, matrix in fields.items():
        if np.shape(matrix) != lattice.shape:
            msg = (
                f"Field {name} of shape {np.shape(matrix)} does not match the lattice "
                f"{lattice.shape}"
            )
            logger.error(msg)
            raise InputError(msg)
    os.makedirs(out_dir, exist_ok=True)
    snapshot = SnapshotFiles()
    for name, matrix in fields.items():
        csv_name = f"{name}_h{hour}.csv"
        write_matrix(matrix, os.path.join(out_dir, csv_name))
        snapshot.files.append(csv_name)
        if greymaps:
            pgm_name = f"{name}_h{hour}.pgm"
            snapshot.greymap_ranges[pgm_name] = write_greymap(
                matrix, os.path.join(out_dir, pgm_name)
            )
            snapshot.files.append(pgm_name)
    mask_name = f"geom_h{hour}.txt"
    with open(os.path.join(out_dir, mask_name), "wt", newline="\n") as file:
        file.write(to_mask(lattice))
    snapshot.files.append(mask_name)
    return snapshot


def state_fields(state: SimulationState, context: SimulationContext) -> Dict[str, np.ndarray]:
    """Snapshot fields of a completed hour: velocity in mm/s, lattice density, C_s, C_bio, M_ox"""
    fields: Dict[str, np.ndarray] = {}
    if state.flow is not None:
        to_mm_per_s = context.scales.dx_mm / context.scales.dt_flow_s
        fields["ux"] = state.flow.ux * to_mm_per_s
        fields["uy"] = state.flow.uy * to_mm_per_s
        fields["rho"] = state.flow.rho
    fields["conc"] = state.substrate
    fields["cbio"] = state.biofilm.concentration
    fields["mox"] = state.biofilm.m_ox
    return fields


def package_versions() -> Dict[str, str]:
    return {
        "mfc_lbm": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "python": platform.python_version(),
    }


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(kw_only=True)
class RunManifest:
    """
    Attributes:
        config: resolved configuration as ``section.key`` -> value
        artifacts: files written by the run, relative to the output directory
        versions: package versions
        seed: seed of the run
        started_at: ISO timestamp (UTC)
        finished_at: ISO timestamp (UTC)
        status: termination status
        message: termination message, empty on completion
        hours_completed: number of records
        greymap_ranges: min and max of every greymap
    """

    config: Dict[str, Any]
    artifacts: List[str]
    versions: Dict[str, str]
    seed: int
    started_at: str
    finished_at: str
    status: str
    message: str = ""
    hours_completed: int = 0
    greymap_ranges: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": self.config,
            "artifacts": self.artifacts,
            "versions": self.versions,
            "seed": self.seed,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "status": self.status,
            "message": self.message,
            "hours_completed": self.hours_completed,
            "greymap_ranges": {name: list(bounds) for name, bounds in self.greymap_ranges.items()},
        }

    def write(self, path: PathLike) -> None:
        with open(path, "wt", newline="\n") as file:
            json.dump(self.to_dict(), file, indent=2, sort_keys=True)
            file.write("\n")


class RunRecorder:
    """Writes snapshots and checkpoints as hours complete, and the time series and manifest at
    the end of a run"""

    def __init__(self, out_dir: PathLike, config: SimulationConfig):
        self.out_dir = os.fspath(out_dir)
        self.config = config
        self.started_at = _timestamp()
        self.artifacts: List[str] = []
        self.greymap_ranges: Dict[str, Tuple[float, float]] = {}
        self.manifest: Optional[RunManifest] = None
        os.makedirs(self.out_dir, exist_ok=True)

    def _add_artifact(self, name: str) -> None:
        if name not in self.artifacts:
            self.artifacts.append(name)

    def on_hour(self, state: SimulationState, context: SimulationContext, snapshot: bool) -> None:
        hour = state.hour - 1
        if snapshot:
            written = write_snapshot(
                state_fields(state, context),
                state.lattice,
                hour,
                self.out_dir,
                greymaps=self.config.run.greymaps,
            )
            for name in written.files:
                self._add_artifact(name)
            self.greymap_ranges.update(written.greymap_ranges)
        every = self.config.run.checkpoint_every
        if every > 0 and state.hour % every == 0:
            save_checkpoint(state, os.path.join(self.out_dir, CHECKPOINT_FILE))
            self._add_artifact(CHECKPOINT_FILE)

    def on_finish(self, result: SimulationResult, context: SimulationContext) -> None:
        if result.records:
            write_timeseries(result.records, os.path.join(self.out_dir, TIMESERIES_FILE))
            self._add_artifact(TIMESERIES_FILE)
        self.manifest = RunManifest(
            config=self.config.echo(),
            artifacts=list(self.artifacts),
            versions=package_versions(),
            seed=self.config.run.seed,
            started_at=self.started_at,
            finished_at=_timestamp(),
            status=result.status.value,
            message=result.message,
            hours_completed=len(result.records),
            greymap_ranges=dict(self.greymap_ranges),
        )
        self.manifest.write(os.path.join(self.out_dir, MANIFEST_FILE))
        logger.info(
            f"Run {result.status.value} after {len(result.records)} hours, "
            f"outputs in {self.out_dir}"
        )
