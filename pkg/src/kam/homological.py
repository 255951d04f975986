# src/kam/homological.py
"""
Solution of the homological equation {F, N} + N^ = R by division of
Fourier coefficients through the small divisors.
"""
import logging
from typing import Tuple

import numpy as np

from apseries import TorusSeries
from constants import HOMOLOGICAL_RESIDUAL_TOL, ZERO_DIVISOR_FLOOR
from errors import BoundViolated, ZeroDivisor
from kam.base import Generator, NormalForm, NormalIncrement

logger = logging.getLogger(__name__)


def mode_divisors(series: TorusSeries, normal: NormalForm) -> np.ndarray:
    """<k, omega> + <k~, w~_p> for every stored mode and node, shape (M, P)."""
    lam = series.space.lam
    spatial = series.modes[:, :lam] @ normal.omega.array
    internal = series.modes[:, lam:] @ normal.omega_tilde.T
    return spatial[:, None] + internal


def bracket_with_normal(F: TorusSeries, normal: NormalForm) -> TorusSeries:
    """{F, N} = <omega, d_theta F> + <w~, d_x F>, evaluated term by term."""
    result = TorusSeries.zero(F.space, F.analyticity)
    for lam_index, value in zip(normal.omega.window.indices, normal.omega.values):
        result = result + F.derivative(("theta", lam_index)).scale(value)
    for i in range(1, F.space.n + 1):
        result = result + F.derivative(("x", i)).scale(normal.omega_tilde[:, i - 1])
    return result


def solve_homological(
    R: TorusSeries, normal: NormalForm
) -> Tuple[Generator, NormalIncrement, float]:
    """
    Solve {F, N} + N^ = R.

    Returns:
            (F, N^, residual) with residual = |||{F,N} + N^ - R||| computed
            independently of the division

    Raises:
            ZeroDivisor: If a retained divisor vanishes
            BoundViolated: If the residual exceeds its tolerance
    """
    space = R.space
    zero = np.zeros(space.dim, dtype=np.int64)
    mean_block = R.mean()
    mean = TorusSeries.from_terms(space, [(zero, mean_block)], R.analyticity)
    basis = space.basis
    increment = NormalIncrement(
        e_hat=mean_block[:, 0].real.copy(),
        v=np.stack([mean_block[:, basis.unit(j)].real for j in range(space.n)], axis=-1),
        series=mean,
    )

    oscillating = R.filter_modes(np.any(R.modes != 0, axis=1))
    if oscillating.is_zero():
        generator = Generator(TorusSeries.zero(space, R.analyticity))
        return generator, increment, 0.0

    divisors = mode_divisors(oscillating, normal)
    used = np.any(oscillating.coeffs != 0, axis=2)
    if np.any(np.abs(divisors[used]) < ZERO_DIVISOR_FLOOR):
        row = int(np.nonzero(np.any(used & (np.abs(divisors) < ZERO_DIVISOR_FLOOR), axis=1))[0][0])
        raise ZeroDivisor(
            f"Vanishing divisor at mode {oscillating.modes[row].tolist()}",
            mode=oscillating.modes[row].tolist(),
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        factors = np.where(used, 1.0 / (1j * divisors), 0.0)
    F = TorusSeries(
        space,
        oscillating.modes,
        oscillating.coeffs * factors[:, :, None],
        R.analyticity,
        canonical=True,
    )

    residual_series = bracket_with_normal(F, normal) + mean - R
    scale = R.norm_total() if R.analyticity is not None else float(np.sum(np.abs(R.coeffs)))
    if residual_series.is_zero():
        residual = 0.0
    elif R.analyticity is not None:
        residual = residual_series.norm_total()
    else:
        residual = float(np.sum(np.abs(residual_series.coeffs)))
    logger.debug(
        "homological solve: %d modes, min |divisor| %.3e, residual %.3e",
        oscillating.size,
        float(np.min(np.abs(divisors[used]))),
        residual,
    )
    if residual > HOMOLOGICAL_RESIDUAL_TOL * scale:
        raise BoundViolated(
            f"Homological residual {residual:.3e} exceeds {HOMOLOGICAL_RESIDUAL_TOL:g} x {scale:.3e}"
        )
    return Generator(F), increment, residual
