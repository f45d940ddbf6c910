"""Discrete anode domain: cell classification, porous electrode geometry and interface queries.

Arrays are indexed ``[y, x]``: rows are y (walls at the first and last row), columns are x
(influent at ``x = 0``, effluent at ``x = Lx - 1``).
"""

from dataclasses import dataclass
from typing import List, Tuple, Optional, Union, TYPE_CHECKING
import os

import numpy as np
from scipy import ndimage

from . import get_logger
from .exceptions import InputError, GeometryParseError, PercolationError
from .types_for_mfc import CellKind, CELL_KIND_TO_CHAR, CHAR_TO_CELL_KIND

if TYPE_CHECKING:
    from .biofilm import BiofilmState

logger = get_logger(__name__)

Site = Tuple[int, int]

_NEIGHBOURS_4 = ((0, 1), (1, 0), (0, -1), (-1, 0))
_MIN_BLOB_SIZE = 2
_MAX_BLOB_SIZE = 6
_CELL_KIND_VALUES = [kind.value for kind in CellKind]
_MASK_LOOKUP = np.array([CELL_KIND_TO_CHAR[CellKind(value)] for value in range(len(CellKind))])


@dataclass(kw_only=True)
class UnitScales:
    """Mapping between lattice and physical units

    Attributes:
        dx_mm: lattice spacing in mm
        dt_flow_s: physical time of one flow LBM step in s
        dt_ade_s: physical time of one advection-diffusion LBM step in s
        dt_outer_h: duration of one outer iteration in h
        cell_volume_l: volume represented by one lattice cell in L
    """

    dx_mm: float
    dt_flow_s: float
    dt_ade_s: float
    cell_volume_l: float
    dt_outer_h: float = 1.0

    def __post_init__(self):
        for name in ["dx_mm", "dt_flow_s", "dt_ade_s", "cell_volume_l", "dt_outer_h"]:
            if getattr(self, name) <= 0:
                msg = f"The unit scale {name} must be positive, got {getattr(self, name)}"
                logger.error(msg)
                raise InputError(msg)
        if self.dt_outer_h != 1.0:
            msg = "One outer iteration corresponds to one hour, dt_outer_h must be 1"
            logger.error(msg)
            raise InputError(msg)

    @classmethod
    def from_parameters(
        cls,
        *,
        dx_mm: float,
        tau: float,
        viscosity_mm2_per_s: float,
        tau_d: float,
        diffusivity_mm2_per_s: float,
        anode_volume_l: float,
        n_cells: int,
    ) -> "UnitScales":
        """Diffusive scaling: dt = nu_lattice * dx^2 / nu for each of the two solvers"""
        nu_lattice = (tau - 0.5) / 3
        d_lattice = (tau_d - 0.5) / 3
        return cls(
            dx_mm=dx_mm,
            dt_flow_s=nu_lattice * dx_mm**2 / viscosity_mm2_per_s,
            dt_ade_s=d_lattice * dx_mm**2 / diffusivity_mm2_per_s,
            cell_volume_l=anode_volume_l / n_cells,
        )

    def velocity_to_flow_lattice(self, velocity_mm_per_s: float) -> float:
        return velocity_mm_per_s * self.dt_flow_s / self.dx_mm

    @property
    def flow_to_ade_velocity_factor(self) -> float:
        return self.dt_ade_s / self.dt_flow_s


@dataclass
class Lattice:
    """2D grid of cell kinds

    :param kinds: integer array of shape (Ly, Lx) holding ``CellKind`` values
    :param dx_mm: lattice spacing in mm
    """

    kinds: np.ndarray
    dx_mm: float = 1.0

    def __post_init__(self):
        self.kinds = np.asarray(self.kinds, dtype=np.int8)
        if self.kinds.ndim != 2:
            msg = f"The cell-kind grid must be two dimensional, got shape {self.kinds.shape}"
            logger.error(msg)
            raise InputError(msg)
        if not np.isin(self.kinds, _CELL_KIND_VALUES).all():
            msg = "The cell-kind grid contains values that are not a CellKind"
            logger.error(msg)
            raise InputError(msg)
        self._check_boundary_bands()

    def _check_boundary_bands(self) -> None:
        height, width = self.kinds.shape
        rows, cols = np.indices(self.kinds.shape)
        misplaced = (
            ((self.kinds == CellKind.INLET.value) & (cols != 0))
            | ((self.kinds == CellKind.OUTLET.value) & (cols != width - 1))
            | ((self.kinds == CellKind.WALL.value) & (rows != 0) & (rows != height - 1))
        )
        if misplaced.any():
            y, x = np.argwhere(misplaced)[0]
            msg = (
                f"Boundary cell at row {y}, column {x} is outside its band: inlet cells belong "
                f"to the first column, outlet cells to the last column and walls to the "
                f"first and last row"
            )
            logger.error(msg)
            raise InputError(msg)

    @property
    def width(self) -> int:
        return self.kinds.shape[1]

    @property
    def height(self) -> int:
        return self.kinds.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.kinds.shape  # type: ignore[return-value]

    def is_kind(self, *kinds: CellKind) -> np.ndarray:
        return np.isin(self.kinds, [kind.value for kind in kinds])

    @property
    def flow_obstacles(self) -> np.ndarray:
        """Cells that are impermeable for the fluid"""
        return self.is_kind(CellKind.ELECTRODE_SOLID, CellKind.BIOFILM, CellKind.WALL)

    @property
    def scalar_obstacles(self) -> np.ndarray:
        """Cells closed to substrate transport; biofilm stays open for diffusion"""
        return self.is_kind(CellKind.ELECTRODE_SOLID, CellKind.WALL)

    @property
    def has_ports(self) -> bool:
        return bool(self.is_kind(CellKind.INLET).any() and self.is_kind(CellKind.OUTLET).any())

    def copy(self) -> "Lattice":
        return Lattice(kinds=self.kinds.copy(), dx_mm=self.dx_mm)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lattice):
            return NotImplemented
        return self.dx_mm == other.dx_mm and np.array_equal(self.kinds, other.kinds)


def _empty_compartment(width: int, height: int) -> np.ndarray:
    kinds = np.full((height, width), CellKind.FLUID.value, dtype=np.int8)
    kinds[1:-1, 0] = CellKind.INLET.value
    kinds[1:-1, -1] = CellKind.OUTLET.value
    kinds[0, :] = CellKind.WALL.value
    kinds[-1, :] = CellKind.WALL.value
    return kinds


def make_channel(length: int, width: int, open_ends: bool = True, dx_mm: float = 1.0) -> Lattice:
    """Straight channel of ``width`` fluid rows between two wall rows

    Without open ends the channel has no inlet/outlet and is periodic along x.
    """
    if length < 1 or width < 1:
        msg = f"A channel needs a positive length and width, got {length} x {width}"
        logger.error(msg)
        raise InputError(msg)
    if open_ends:
        kinds = _empty_compartment(length, width + 2)
    else:
        kinds = np.full((width + 2, length), CellKind.FLUID.value, dtype=np.int8)
        kinds[0, :] = CellKind.WALL.value
        kinds[-1, :] = CellKind.WALL.value
    return Lattice(kinds=kinds, dx_mm=dx_mm)


def _interior(lattice: Lattice) -> np.ndarray:
    return ~lattice.is_kind(CellKind.WALL, CellKind.INLET, CellKind.OUTLET)


def porosity(lattice: Lattice) -> float:
    """Fraction of non-solid cells in the interior (walls, inlet and outlet bands excluded)"""
    interior = _interior(lattice)
    n_interior = interior.sum()
    if n_interior == 0:
        return 1.0
    n_solid = (interior & lattice.is_kind(CellKind.ELECTRODE_SOLID)).sum()
    return float((n_interior - n_solid) / n_interior)


def is_percolating(lattice: Lattice) -> bool:
    """Whether a 4-connected fluid path joins the inlet column to the outlet column"""
    if not lattice.has_ports:
        return True
    open_cells = lattice.is_kind(CellKind.FLUID, CellKind.INLET, CellKind.OUTLET)
    labels, _ = ndimage.label(open_cells)
    inlet_labels = set(np.unique(labels[lattice.is_kind(CellKind.INLET)])) - {0}
    outlet_labels = set(np.unique(labels[lattice.is_kind(CellKind.OUTLET)])) - {0}
    return len(inlet_labels & outlet_labels) > 0


def _grow_blob(
    rng: np.random.Generator, seed_cell: Site, size: int, placeable: np.ndarray
) -> List[Site]:
    blob = [seed_cell]
    attempts = 0
    while len(blob) < size and attempts < 20 * size:
        attempts += 1
        y, x = blob[rng.integers(len(blob))]
        dy, dx = _NEIGHBOURS_4[rng.integers(4)]
        candidate = (y + dy, x + dx)
        if (
            0 <= candidate[0] < placeable.shape[0]
            and 0 <= candidate[1] < placeable.shape[1]
            and placeable[candidate]
            and candidate not in blob
        ):
            blob.append(candidate)
    return blob


def generate_random_electrode(
    width: int, height: int, target_porosity: float, seed: int, dx_mm: float = 1.0
) -> Lattice:
    """
    Generates a compartment with a random porous electrode made of small solid blobs.

    Blobs of 2 to 6 cells are grown from random seed cells and placed by rejection sampling
    until the solid fraction of the interior equals ``1 - target_porosity`` (to one cell).
    The first and last interior columns are kept free of solids.

    :param width: Lx, number of cells along the flow direction
    :param height: Ly, number of cells across the flow, including the two wall rows
    :param target_porosity: non-solid fraction of the interior, in (0, 1]
    :param seed: seed of the random generator, the result is a pure function of the inputs
    :param dx_mm: lattice spacing in mm
    :return: Lattice
    """
    if not 0 < target_porosity <= 1:
        msg = f"The target porosity must be in (0, 1], got {target_porosity}"
        logger.error(msg)
        raise InputError(msg)
    if width < 4 or height < 4:
        msg = f"The lattice must be at least 4 x 4 cells, got {width} x {height}"
        logger.error(msg)
        raise InputError(msg)

    kinds = _empty_compartment(width, height)
    n_interior = (width - 2) * (height - 2)
    n_target = int(round((1 - target_porosity) * n_interior))
    placeable = np.zeros_like(kinds, dtype=bool)
    placeable[1:-1, 2:-2] = True
    if n_target > placeable.sum():
        msg = f"The target porosity {target_porosity} leaves no room for fluid"
        logger.error(msg)
        raise PercolationError(f"domain not percolating: {msg}")

    rng = np.random.default_rng(seed)
    candidates = np.argwhere(placeable)
    n_solid = 0
    rejections = 0
    while n_solid < n_target:
        seed_cell = tuple(candidates[rng.integers(len(candidates))])
        if not placeable[seed_cell]:
            rejections += 1
            if rejections > 1000 * max(n_target, 1):
                msg = f"Could not place electrode blobs for porosity {target_porosity}"
                logger.error(msg)
                raise PercolationError(f"domain not percolating: {msg}")
            continue
        size = int(rng.integers(_MIN_BLOB_SIZE, _MAX_BLOB_SIZE + 1))
        blob = _grow_blob(rng, seed_cell, size, placeable)
        blob = blob[: n_target - n_solid]
        for cell in blob:
            kinds[cell] = CellKind.ELECTRODE_SOLID.value
            placeable[cell] = False
        n_solid += len(blob)

    lattice = Lattice(kinds=kinds, dx_mm=dx_mm)
    if not is_percolating(lattice):
        msg = (
            f"domain not percolating: no fluid path from inlet to outlet for porosity "
            f"{target_porosity} and seed {seed}"
        )
        logger.error(msg)
        raise PercolationError(msg)
    return lattice


def load_geometry(mask: str, dx_mm: float = 1.0) -> Lattice:
    """Builds a lattice from a text mask, one row per line, first line is y = 0"""
    lines = mask.splitlines()
    while lines and lines[-1].strip() == "":
        lines.pop()
    if not lines:
        msg = "The geometry mask is empty"
        logger.error(msg)
        raise GeometryParseError(msg)
    width = len(lines[0])
    kinds = np.zeros((len(lines), width), dtype=np.int8)
    for row, line in enumerate(lines):
        if len(line) != width:
            msg = (
                f"Ragged geometry mask at row {row}, column {min(len(line), width)}: "
                f"expected {width} characters, got {len(line)}"
            )
            logger.error(msg)
            raise GeometryParseError(msg)
        for col, char in enumerate(line):
            try:
                kinds[row, col] = CHAR_TO_CELL_KIND[char].value
            except KeyError:
                msg = f"Unknown cell character '{char}' at row {row}, column {col}"
                logger.error(msg)
                raise GeometryParseError(msg) from None
    try:
        return Lattice(kinds=kinds, dx_mm=dx_mm)
    except InputError as err:
        raise GeometryParseError(str(err)) from err


def load_geometry_file(path: Union[str, os.PathLike], dx_mm: float = 1.0) -> Lattice:
    with open(path, "rt") as file:
        return load_geometry(file.read(), dx_mm=dx_mm)


def to_mask(lattice: Lattice) -> str:
    """Inverse of ``load_geometry``"""
    return "".join("".join(row) + "\n" for row in _MASK_LOOKUP[lattice.kinds])


def interface_cells(lattice: Lattice, biofilm: Optional["BiofilmState"] = None) -> List[Site]:
    """
    Fluid cells with at least one 4-neighbour that is electrode solid or biofilm, in
    row-major order.
    """
    if biofilm is not None and biofilm.shape != lattice.shape:
        msg = f"Lattice {lattice.shape} and biofilm state {biofilm.shape} differ in shape"
        logger.error(msg)
        raise InputError(msg)
    surface = np.pad(
        lattice.is_kind(CellKind.ELECTRODE_SOLID, CellKind.BIOFILM), 1, constant_values=False
    )
    touching = surface[:-2, 1:-1] | surface[2:, 1:-1] | surface[1:-1, :-2] | surface[1:-1, 2:]
    front = touching & lattice.is_kind(CellKind.FLUID)
    return [(int(y), int(x)) for y, x in np.argwhere(front)]
