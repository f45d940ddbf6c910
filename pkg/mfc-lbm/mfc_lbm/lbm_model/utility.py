from typing import Callable, NamedTuple, Sequence

import numpy as np

from .. import get_logger
from ..exceptions import NonConvergenceError, InputError

logger = get_logger(__name__)


class ConvergenceInfo(NamedTuple):
    steps: int
    residual: float


def relative_l2_change(new: np.ndarray, old: np.ndarray) -> float:
    """``||new - old|| / ||new||``; zero when both fields vanish"""
    change = float(np.linalg.norm(new - old))
    scale = float(np.linalg.norm(new))
    if scale == 0.0:
        return 0.0 if change == 0.0 else np.inf
    return change / scale


def iterate_to_steady(
    *,
    advance: Callable[[int], None],
    observe: Callable[[], Sequence[np.ndarray]],
    tolerance: float,
    check_every: int,
    max_steps: int,
    solver_name: str,
) -> ConvergenceInfo:
    """
    Advances a solver in chunks of ``check_every`` steps until every observed field changes by
    less than ``tolerance`` (relative L2) between two checks.

    :param advance: callable advancing the solver by the given number of steps
    :param observe: callable returning the fields monitored for convergence
    :raises NonConvergenceError: when ``max_steps`` is reached above tolerance
    """
    if check_every < 1 or max_steps < check_every:
        msg = f"Invalid convergence settings: check_every={check_every}, max_steps={max_steps}"
        logger.error(msg)
        raise InputError(msg)
    previous = [field.copy() for field in observe()]
    steps = 0
    residual = np.inf
    while steps < max_steps:
        advance(check_every)
        steps += check_every
        current = [field.copy() for field in observe()]
        residual = max(relative_l2_change(new, old) for new, old in zip(current, previous))
        if residual < tolerance:
            logger.info(f"{solver_name} converged in {steps} steps (residual {residual:.3e})")
            return ConvergenceInfo(steps=steps, residual=residual)
        previous = current
    msg = (
        f"{solver_name} did not converge in {max_steps} steps: residual {residual:.3e} "
        f"above tolerance {tolerance:.1e}"
    )
    logger.error(msg)
    raise NonConvergenceError(msg, residual=residual, steps=steps)
