# src/kam/truncation.py
"""
Truncation of a perturbation to its finitely many low-order, z-affine terms.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from apseries import TorusSeries
from errors import BoundViolated, ConfigValidationError

logger = logging.getLogger(__name__)

# slack for the ceiling in truncation_order against float noise in (K - mu w)/rho
_CEIL_SLACK = 1.0e-9


def truncation_order(weight: float, mu: float, rho: float, K: float) -> int:
    """
    Smallest nonnegative <A> with mu [A] + rho <A> >= K.

    Args:
            weight: Component weight [A]
            mu: Weight decay parameter
            rho: Order decay parameter
            K: Truncation level
    """
    if mu <= 0 or rho <= 0:
        raise ConfigValidationError("mu and rho must be positive")
    if K < 0:
        raise ConfigValidationError(f"K must be nonnegative, got {K}")
    return max(0, math.ceil((K - mu * weight) / rho - _CEIL_SLACK))


@dataclass
class TruncationResult:
    """Retained part R, measured discard and its bound"""

    retained: TorusSeries
    discarded_norm: float
    bound: float
    orders: List[int]


def truncate(
    perturbation: TorusSeries, mu: float, rho: float, K: float, eta: float
) -> TruncationResult:
    """
    Keep the modes of order <= <A> in their home component and the z-degree
    <= 1 part of each.

    The discard P - R is measured at (m - mu, r - rho, eta s) and compared
    with (e^-K + eta^2/(1-eta)) |||P|||_{m,r,s}.

    Raises:
            BoundViolated: If the measured discard exceeds its bound
    """
    a = perturbation.analyticity
    if a is None:
        raise ConfigValidationError("truncate needs a series with analyticity parameters")
    if not (0 < mu < a.m and 0 < rho < a.r and 0 < eta < 1):
        raise ConfigValidationError(
            f"truncate requires 0<mu<m, 0<rho<r, 0<eta<1 (mu={mu}, rho={rho}, eta={eta})"
        )

    structure = perturbation.space.structure
    orders = [truncation_order(w, mu, rho, K) for w in structure.component_weights]
    if perturbation.is_zero():
        return TruncationResult(perturbation, 0.0, 0.0, orders)

    caps = np.asarray(orders)[perturbation.components]
    low = perturbation.filter_modes(perturbation.orders <= caps)
    retained = low.truncate_degree(1)
    discarded = perturbation - retained

    measured = discarded.norm_total(a.m - mu, a.r - rho, eta * a.s)
    total = perturbation.norm_total()
    bound = (math.exp(-K) + eta**2 / (1.0 - eta)) * total
    logger.debug(
        "truncation kept %d of %d modes, discard %.3e (bound %.3e)",
        retained.size,
        perturbation.size,
        measured,
        bound,
    )
    if measured > bound * (1.0 + 1e-8):
        raise BoundViolated(
            f"Discarded norm {measured:.6e} exceeds bound {bound:.6e}",
            measured=measured,
            bound=bound,
        )
    if retained.norm_total() > 2.0 * total * (1.0 + 1e-12):
        raise BoundViolated("Retained part exceeds twice the perturbation norm")
    return TruncationResult(retained, measured, bound, orders)
