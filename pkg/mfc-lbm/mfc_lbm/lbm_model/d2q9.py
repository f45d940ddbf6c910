"""D2Q9 velocity set and the kernels shared by the flow and advection-diffusion solvers.

Distributions are stored as arrays of shape (9, Ly, Lx). Directions: 0 rest, 1 east, 2 north,
3 west, 4 south, 5 north-east, 6 north-west, 7 south-west, 8 south-east.
"""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

ArrayOrFloat = Union[float, np.ndarray]


@dataclass(frozen=True)
class D2Q9Set:
    velocities: np.ndarray
    weights: np.ndarray
    opposite: np.ndarray

    @property
    def cx(self) -> np.ndarray:
        return self.velocities[:, 0]

    @property
    def cy(self) -> np.ndarray:
        return self.velocities[:, 1]

    def __len__(self) -> int:
        return len(self.weights)


D2Q9 = D2Q9Set(
    velocities=np.array(
        [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1], [1, 1], [-1, 1], [-1, -1], [1, -1]]
    ),
    weights=np.array([4 / 9] + [1 / 9] * 4 + [1 / 36] * 4),
    opposite=np.array([0, 3, 4, 1, 2, 7, 8, 5, 6]),
)


def _along_directions(values: np.ndarray, ndim: int) -> np.ndarray:
    return values.reshape((-1,) + (1,) * ndim)


def equilibrium(rho: ArrayOrFloat, ux: ArrayOrFloat, uy: ArrayOrFloat) -> np.ndarray:
    """
    Second order equilibrium in lattice units (c_s^2 = 1/3):
    ``w_i rho [1 + 3 c_i.u + 9/2 (c_i.u)^2 - 3/2 u^2]``

    :return: array of shape (9, *rho.shape)
    """
    rho, ux, uy = np.broadcast_arrays(
        np.asarray(rho, dtype=float), np.asarray(ux, dtype=float), np.asarray(uy, dtype=float)
    )
    ndim = rho.ndim
    cu = _along_directions(D2Q9.cx, ndim) * ux + _along_directions(D2Q9.cy, ndim) * uy
    usq = ux**2 + uy**2
    return _along_directions(D2Q9.weights, ndim) * rho * (1 + 3 * cu + 4.5 * cu**2 - 1.5 * usq)


def moments(f: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Zeroth moment and the two first moments of the distributions"""
    rho = f.sum(axis=0)
    jx = np.tensordot(D2Q9.cx, f, axes=1)
    jy = np.tensordot(D2Q9.cy, f, axes=1)
    return rho, jx, jy


def forcing_term(
    ux: np.ndarray, uy: np.ndarray, force: Tuple[float, float], tau: float
) -> np.ndarray:
    """Guo source term for a uniform body force"""
    fx, fy = force
    ndim = ux.ndim
    cx = _along_directions(D2Q9.cx, ndim)
    cy = _along_directions(D2Q9.cy, ndim)
    cu = cx * ux + cy * uy
    term_x = 3 * (cx - ux) + 9 * cu * cx
    term_y = 3 * (cy - uy) + 9 * cu * cy
    return (1 - 0.5 / tau) * _along_directions(D2Q9.weights, ndim) * (term_x * fx + term_y * fy)


def stream(post_collision: np.ndarray) -> np.ndarray:
    """Propagates each population one link along its velocity into a new buffer (periodic)"""
    streamed = np.empty_like(post_collision)
    for i, (cx, cy) in enumerate(D2Q9.velocities):
        streamed[i] = np.roll(post_collision[i], shift=(cy, cx), axis=(0, 1))
    return streamed


class BounceBackLinks:
    """
    Links from open cells into obstacle cells for half-way bounce-back.

    ``masks[i]`` marks the open cells whose neighbour along ``c_i`` is an obstacle; the population
    leaving along ``c_i`` returns to the same cell along the opposite direction.
    """

    def __init__(self, obstacles: np.ndarray):
        self.obstacles = np.asarray(obstacles, dtype=bool)
        open_cells = ~self.obstacles
        self.masks = np.zeros((len(D2Q9),) + self.obstacles.shape, dtype=bool)
        for i, (cx, cy) in enumerate(D2Q9.velocities):
            if i == 0:
                continue
            neighbour_is_obstacle = np.roll(self.obstacles, shift=(-cy, -cx), axis=(0, 1))
            self.masks[i] = open_cells & neighbour_is_obstacle
        self._sources: Optional[np.ndarray] = None

    def arrived_by_bounce(self, direction: int) -> np.ndarray:
        """Cells where the population along ``direction`` was reflected rather than streamed"""
        return self.masks[D2Q9.opposite[direction]]

    def apply(self, post_collision: np.ndarray, streamed: np.ndarray) -> np.ndarray:
        result = streamed.copy()
        for i in range(1, len(D2Q9)):
            mask = self.masks[i]
            result[D2Q9.opposite[i]][mask] = post_collision[i][mask]
        result[:, self.obstacles] = 0.0
        return result

    def propagate(self, post_collision: np.ndarray) -> np.ndarray:
        """Streaming and bounce-back fused into one gather; obstacle cells come out empty"""
        if self._sources is None:
            self._sources = self._gather_index()
        flat = np.append(post_collision.ravel(), 0.0)
        return np.take(flat, self._sources)

    def _gather_index(self) -> np.ndarray:
        height, width = self.obstacles.shape
        cells = height * width
        y, x = np.indices(self.obstacles.shape)
        here = y * width + x
        sources = np.empty((len(D2Q9), height, width), dtype=np.intp)
        for i, (cx, cy) in enumerate(D2Q9.velocities):
            upstream = ((y - cy) % height) * width + (x - cx) % width
            sources[i] = np.where(
                self.arrived_by_bounce(i),
                D2Q9.opposite[i] * cells + here,
                i * cells + upstream,
            )
        sources[:, self.obstacles] = len(D2Q9) * cells
        return sources
