# src/kam/parameters.py
"""
Frequencies as parameters.

For H = <omega, J> + h(y) + f(theta, x, y) the internal frequency
w~ = h_y(y0) replaces the action y0 as parameter. Writing y = y0 + z,

    e(w~) = h(y0),   P = f(theta, x, y0 + z) + int_0^1 (1-t) <h_yy(y0 + t z) z, z> dt

and P is fitted by least squares to z-polynomials of the basis degree.
"""
import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from apseries import Analyticity, SeriesSpace, TorusSeries
from constants import GAUSS_LEGENDRE_NODES, NEWTON_MAX_ITER, NEWTON_TOL
from errors import ConfigValidationError, DegenerateJacobian, NewtonDiverged
from kam.base import Hamiltonian, NormalForm
from kam.flow import FlowGrid, gauss_legendre_times

logger = logging.getLogger(__name__)

VectorField = Callable[[np.ndarray], np.ndarray]
PerturbationSampler = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

_DET_FLOOR = 1.0e-12


def invert_gradient(
    h_y: VectorField, h_yy: VectorField, target: np.ndarray, guess: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, int]:
    """
    Solve h_y(y) = target by Newton's method.

    Raises:
            DegenerateJacobian: If det h_yy vanishes along the iteration
            NewtonDiverged: If no convergence within NEWTON_MAX_ITER steps
    """
    target = np.asarray(target, dtype=float)
    y = target.copy() if guess is None else np.asarray(guess, dtype=float).copy()
    scale = max(1.0, float(np.max(np.abs(target))))
    for iteration in range(1, NEWTON_MAX_ITER + 1):
        g = np.asarray(h_y(y), dtype=float) - target
        if np.max(np.abs(g)) <= NEWTON_TOL * scale:
            return y, iteration
        jac = np.atleast_2d(np.asarray(h_yy(y), dtype=float))
        if abs(np.linalg.det(jac)) < _DET_FLOOR * max(1.0, np.max(np.abs(jac))) ** jac.shape[0]:
            raise DegenerateJacobian(
                f"det h_yy vanishes at y = {y.tolist()}", y=y.tolist()
            )
        y = y - np.linalg.solve(jac, g)
    raise NewtonDiverged(
        f"Inverting h_y at {target.tolist()} did not converge in {NEWTON_MAX_ITER} iterations",
        target=target.tolist(),
    )


def quadratic_remainder(
    h_yy: VectorField, y0: np.ndarray, z: np.ndarray, nodes: int = GAUSS_LEGENDRE_NODES
) -> np.ndarray:
    """int_0^1 (1-t) <h_yy(y0 + t z) z, z> dt for every row of z, shape (Z,)."""
    times, weights = gauss_legendre_times(nodes)
    out = np.zeros(z.shape[0])
    for row, zr in enumerate(z):
        total = 0.0
        for t, w in zip(times, weights):
            hess = np.atleast_2d(np.asarray(h_yy(y0 + t * zr), dtype=float))
            total += w * (1.0 - t) * float(zr @ hess @ zr)
        out[row] = total
    return out


def _z_samples(n: int, degree: int, s: float) -> np.ndarray:
    count = degree + 3
    axis = s * np.cos(np.pi * np.arange(count) / (count - 1))
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def introduce_parameters(
    h: Callable[[np.ndarray], float],
    h_y: VectorField,
    h_yy: VectorField,
    space: SeriesSpace,
    omega,
    s: float,
    f: Optional[PerturbationSampler] = None,
    angle_sizes: Optional[Sequence[int]] = None,
    y_guess: Optional[np.ndarray] = None,
    analyticity: Optional[Analyticity] = None,
) -> Tuple[Hamiltonian, np.ndarray]:
    """
    Build the parameter family H(w~) = N(w~) + P(w~) on the grid of the space.

    Args:
            h: Integrable part h(y)
            h_y: Its gradient, the frequency map
            h_yy: Its Hessian
            space: Series space whose grid holds the target frequencies
            omega: External frequency
            s: Radius of the z-samples used for the polynomial fit
            f: Perturbation sampler f(theta (G, L), x (G, n), y (G, n)) -> (G,)
            angle_sizes: FFT sizes per angle column for sampling f
            y_guess: Starting point of the Newton inversion
            analyticity: Parameters attached to P

    Returns:
            (Hamiltonian, y0 of shape (P, n))

    Raises:
            DegenerateJacobian: If the frequency map is degenerate at a node
    """
    if s <= 0:
        raise ConfigValidationError(f"sample radius s must be positive, got {s}")
    grid = space.grid
    basis = space.basis
    n = space.n

    y0 = np.zeros((grid.size, n))
    e = np.zeros(grid.size)
    for p, target in enumerate(grid.nodes):
        y0[p], iterations = invert_gradient(h_y, h_yy, target, y_guess)
        e[p] = float(h(y0[p]))
        logger.debug("node %d: w~=%s -> y0=%s in %d Newton steps", p, target, y0[p], iterations)

    sizes = tuple(angle_sizes) if angle_sizes is not None else (1,) * space.dim
    if len(sizes) != space.dim:
        raise ConfigValidationError(f"angle_sizes needs {space.dim} entries, got {len(sizes)}")
    fgrid = FlowGrid(space, sizes)
    z = _z_samples(n, basis.degree, s)
    design = basis.monomials(z)

    values = np.zeros((fgrid.size, grid.size, basis.size), dtype=complex)
    for p in range(grid.size):
        quad = quadratic_remainder(h_yy, y0[p], z)
        samples = np.broadcast_to(quad, (fgrid.size, z.shape[0])).copy()
        if f is not None:
            for row, zr in enumerate(z):
                y = np.broadcast_to(y0[p] + zr, (fgrid.size, n))
                samples[:, row] += np.asarray(f(fgrid.theta, fgrid.x, y), dtype=float)
        fitted, *_ = np.linalg.lstsq(design, samples.T, rcond=None)
        values[:, p, :] = fitted.T
    perturbation = fgrid.to_series(values, analyticity)
    return Hamiltonian(NormalForm(e, omega, grid), perturbation), y0
