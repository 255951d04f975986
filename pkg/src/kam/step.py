# src/kam/step.py
"""
One KAM step: truncate, solve the homological equation, flow by the
generator, and reparametrize by the inverted frequency map.

The new perturbation is

    P+ = integral_0^1 [(1-t){N^, F} + t{R, F}] o X_F^t dt + (P - R) o X_F^1

with the t-integral taken by Gauss-Legendre quadrature on the flow samples.
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np

from approx import ApproxFunction
from apseries import Analyticity, ParameterGrid, TorusSeries, poisson_bracket
from constants import C0_FLOW, GAUSS_LEGENDRE_NODES, KAM_A
from errors import ErrorBoundExceeded, SmallnessViolated
from kam.base import Generator, Hamiltonian, KamState, KamStepReport
from kam.flow import FlowGrid, TransformationMap, compose, flow_time1, gauss_legendre_times
from kam.frequency_map import FrequencyInverse, invert_frequency_map
from kam.homological import solve_homological
from kam.truncation import truncate
from resonance import extended_divisor_bound

logger = logging.getLogger(__name__)


def step_bound(state: KamState, epsilon: float) -> float:
    """32 Gamma_mu Gamma_rho E eps + 2 e^-K eps + 4 eta^2 eps."""
    return (
        32.0 * state.gamma_mu_rho * state.E + 2.0 * math.exp(-state.K) + 4.0 * state.eta**2
    ) * epsilon


def displacement_bound(state: KamState, a: int = KAM_A) -> float:
    """max(2^(2-a-j) Gamma_j E_j, 4 E_j / h_j) for the weighted step displacement."""
    first = 2.0 ** (2 - a - state.j) * math.exp(state.log_gamma + state.log_E)
    second = 4.0 * state.E / state.h if state.h > 0 else 0.0
    return max(first, second)


def _identity_inverse(grid: ParameterGrid, targets: np.ndarray) -> FrequencyInverse:
    return FrequencyInverse(
        targets=targets,
        points=targets.copy(),
        matrix=grid.interpolation_matrix(targets),
        iterations=0,
        residual=0.0,
        shift=0.0,
        derivative_deviation=0.0,
    )


def _move_to_grid(series: TorusSeries, matrix: np.ndarray, grid: ParameterGrid) -> TorusSeries:
    moved = series.reparametrize(matrix)
    if grid is series.space.grid:
        return moved
    space = series.space.with_grid(grid)
    return TorusSeries(space, moved.modes, moved.coeffs, moved.analyticity, canonical=True)


def kam_step(
    hamiltonian: Hamiltonian,
    state: KamState,
    delta: Optional[ApproxFunction] = None,
    next_grid: Optional[ParameterGrid] = None,
    next_h: Optional[float] = None,
    epsilon: Optional[float] = None,
    quadrature_nodes: int = GAUSS_LEGENDRE_NODES,
) -> Tuple[Hamiltonian, TransformationMap, FrequencyInverse, KamStepReport]:
    """
    Perform one KAM step on H = N + P.

    Args:
            hamiltonian: Current Hamiltonian
            state: Step parameters (m, r, s, h, mu, rho, K, eta, E)
            delta: Approximation function, for the extended divisor report
            next_grid: Parameter grid of the new Hamiltonian (default: unchanged)
            next_h: Parameter radius recorded on the new perturbation
            epsilon: Size of P used in the bound (default: measured |||P|||)
            quadrature_nodes: Gauss-Legendre nodes in t

    Returns:
            (H+, time-1 map, frequency inverse, report)

    Raises:
            SmallnessViolated: If 4 C0 Gamma_mu Gamma_rho E <= eta <= 1/2 fails
            ErrorBoundExceeded: If the measured |||P+||| exceeds the step bound
    """
    analyticity = Analyticity(state.m, state.r, state.s, state.h, state.w)
    P = hamiltonian.perturbation.with_analyticity(analyticity)
    normal = hamiltonian.normal
    grid_old = normal.grid
    grid_new = next_grid if next_grid is not None else grid_old
    new_analyticity = Analyticity(
        state.m - state.mu,
        state.r - 2.0 * state.rho,
        state.eta * state.s / 2.0,
        state.h if next_h is None else next_h,
        state.w,
    )

    input_norm = P.norm_total()
    eps = input_norm if epsilon is None else epsilon
    report = KamStepReport(
        j=state.j, m=state.m, r=state.r, s=state.s, h=state.h, E=state.E, input_norm=input_norm
    )

    gm_E = state.gamma_mu_rho * state.E
    if 4.0 * C0_FLOW * gm_E > state.eta * (1.0 + 1e-12) or state.eta > 0.5:
        raise SmallnessViolated(
            f"4 C0 Gamma_mu Gamma_rho E = {4 * C0_FLOW * gm_E:.4g} <= eta = {state.eta:.4g} <= 1/2 fails"
        )

    if P.is_zero():
        logger.info("step %d: zero perturbation, nothing to do", state.j)
        inverse = _identity_inverse(grid_old, grid_new.nodes)
        space_new = P.space if grid_new is grid_old else P.space.with_grid(grid_new)
        zero = TorusSeries.zero(space_new, new_analyticity)
        flow_map = flow_time1(Generator(TorusSeries.zero(P.space)))
        return (
            Hamiltonian(normal.reparametrized(inverse.matrix, grid_new), zero),
            flow_map,
            inverse,
            report,
        )

    trunc = truncate(P, state.mu, state.rho, state.K, state.eta)
    report.truncation_residual = trunc.discarded_norm
    report.truncation_bound = trunc.bound

    generator, increment, residual = solve_homological(trunc.retained, normal)
    report.homological_residual = residual
    report.frequency_shift = increment.shift_norm

    if delta is not None:
        h_max = extended_divisor_bound(P.space.structure, delta, trunc.orders)
        report.extended_divisor_h = h_max
        if h_max < state.h:
            note = f"extended divisor radius {h_max:.3e} below h={state.h:.3e}"
            report.notes.append(note)
            logger.warning("step %d: %s", state.j, note)

    bracket_mean = poisson_bracket(increment.series, generator.series)
    bracket_r = poisson_bracket(trunc.retained, generator.series)
    rest = P - trunc.retained
    flow_grid = FlowGrid.for_series(P.space, [P, bracket_mean, bracket_r], generator)
    t_nodes, t_weights = gauss_legendre_times(quadrature_nodes)
    flow_map = flow_time1(
        generator, flow_grid, t_nodes, smallness=16.0 * gm_E, max_shift=state.rho
    )
    report.symplectic_residual = flow_map.symplectic_residual

    values = compose(rest, flow_map, flow_map.time_index(1.0))
    for t, weight in zip(t_nodes, t_weights):
        index = flow_map.time_index(t)
        values = values + weight * (
            (1.0 - t) * compose(bracket_mean, flow_map, index) + t * compose(bracket_r, flow_map, index)
        )
    transformed = flow_grid.to_series(values, new_analyticity)

    if state.h > 0:
        inverse = invert_frequency_map(increment.v, grid_old, grid_new.nodes, h=state.h, E=state.E)
    else:
        inverse = invert_frequency_map(increment.v, grid_old, grid_new.nodes)
    report.inversion_residual = inverse.residual

    perturbation = _move_to_grid(transformed, inverse.matrix, grid_new)
    new_normal = normal.shifted(increment.e_hat).reparametrized(inverse.matrix, grid_new)

    report.measured_norm = perturbation.norm_total()
    report.bound_rhs = step_bound(state, eps)
    weighted_phi = inverse.shift / state.h if state.h > 0 else 0.0
    report.displacement = max(flow_map.displacement(state.rho, state.s), weighted_phi)
    report.displacement_bound = displacement_bound(state)
    logger.info(
        "step %d: |||P|||=%.3e -> |||P+|||=%.3e (bound %.3e)",
        state.j,
        input_norm,
        report.measured_norm,
        report.bound_rhs,
    )
    if report.measured_norm > report.bound_rhs:
        raise ErrorBoundExceeded(
            f"Step {state.j}: |||P+||| = {report.measured_norm:.6e} exceeds bound {report.bound_rhs:.6e}",
            step=state.j,
            measured=report.measured_norm,
            bound=report.bound_rhs,
        )
    return Hamiltonian(new_normal, perturbation), flow_map, inverse, report
