# src/kam/frequency_map.py
"""
Inversion of the frequency map w~ -> w~ + v(w~) on the parameter grid.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from apseries import ParameterGrid
from constants import NEWTON_MAX_ITER, NEWTON_TOL
from errors import NewtonDiverged, SmallnessViolated

logger = logging.getLogger(__name__)

_FD_STEP = 1.0e-7


@dataclass
class FrequencyInverse:
    """phi at the target points with its interpolation matrix and checks"""

    targets: np.ndarray
    points: np.ndarray
    matrix: np.ndarray
    iterations: int
    residual: float
    shift: float
    derivative_deviation: float
    within_bounds: bool = True


def _interpolant(v_values: np.ndarray, grid: ParameterGrid):
    def v(point: np.ndarray) -> np.ndarray:
        return grid.interpolate(v_values, point)

    return v


def _jacobian(v, point: np.ndarray) -> np.ndarray:
    n = point.shape[0]
    jac = np.zeros((n, n))
    for i in range(n):
        step = _FD_STEP * max(1.0, abs(point[i]))
        up, down = point.copy(), point.copy()
        up[i] += step
        down[i] -= step
        jac[:, i] = (v(up) - v(down)) / (2.0 * step)
    return jac


def invert_frequency_map(
    v_values: np.ndarray,
    grid: ParameterGrid,
    targets: Optional[np.ndarray] = None,
    h: Optional[float] = None,
    E: Optional[float] = None,
) -> FrequencyInverse:
    """
    Solve phi + v(phi) = target by Newton's method for each target.

    Args:
            v_values: Values of v at the grid nodes, shape (P, n)
            grid: Parameter grid carrying v
            targets: Points to invert at (default: the grid nodes)
            h: Parameter radius, for the smallness checks
            E: Step error size, for the smallness checks

    Raises:
            SmallnessViolated: If |v| > 4E or E > h/16 when both are given
            NewtonDiverged: If an inversion does not converge in NEWTON_MAX_ITER steps
    """
    v_values = np.asarray(v_values, dtype=float).reshape(grid.size, grid.n)
    targets = grid.nodes if targets is None else np.atleast_2d(np.asarray(targets, dtype=float))
    v_sup = float(np.max(np.abs(v_values), initial=0.0))
    if h is not None and E is not None:
        if v_sup > 4.0 * E * (1.0 + 1e-12):
            raise SmallnessViolated(f"|v| = {v_sup:.4g} exceeds 4E = {4 * E:.4g}")
        if E > h / 16.0:
            raise SmallnessViolated(f"E = {E:.4g} exceeds h/16 = {h / 16:.4g}")

    v = _interpolant(v_values, grid)
    points = np.zeros_like(targets)
    worst_iterations = 0
    worst_residual = 0.0
    deviation = 0.0
    for row, target in enumerate(targets):
        phi = target - v(target)
        for iteration in range(1, NEWTON_MAX_ITER + 1):
            g = phi + v(phi) - target
            if np.max(np.abs(g)) <= NEWTON_TOL * max(1.0, float(np.max(np.abs(target)))):
                break
            jac = np.eye(grid.n) + _jacobian(v, phi)
            phi = phi - np.linalg.solve(jac, g)
        else:
            raise NewtonDiverged(
                f"Frequency inversion at {target.tolist()} did not converge in {NEWTON_MAX_ITER} iterations",
                target=target.tolist(),
            )
        points[row] = phi
        worst_iterations = max(worst_iterations, iteration)
        worst_residual = max(worst_residual, float(np.max(np.abs(g))))
        dphi = np.linalg.inv(np.eye(grid.n) + _jacobian(v, phi))
        deviation = max(deviation, float(np.max(np.abs(dphi - np.eye(grid.n)).sum(axis=1))))

    shift = float(np.max(np.abs(points - targets), initial=0.0))
    within = True
    if h is not None and E is not None:
        within = shift <= 4.0 * E * (1.0 + 1e-9) and (h / 4.0) * deviation <= 4.0 * E * (1.0 + 1e-6)
        if not within:
            logger.warning(
                "frequency inverse outside bounds: |phi-id|=%.3e, (h/4)|Dphi-I|=%.3e, 4E=%.3e",
                shift,
                h / 4.0 * deviation,
                4.0 * E,
            )
    return FrequencyInverse(
        targets=targets,
        points=points,
        matrix=grid.interpolation_matrix(points),
        iterations=worst_iterations,
        residual=worst_residual,
        shift=shift,
        derivative_deviation=deviation,
        within_bounds=within,
    )
