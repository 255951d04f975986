# src/kam/flow.py
"""
Pseudo-spectral realization of the time-t maps of a generator F.

Because F is J-free and affine in z, its flow freezes theta, moves x by
x' = F1(theta, x), and acts affinely on z and J:

    z(t) = U4 + U5 z0,    J(t) = J0 + U2 + U3 z0

The trajectories are integrated at every point of a tensor grid over the
active angle columns and every parameter node; series composed with the map
are sampled on the same grid and transformed back by FFT. The symplectic
residual is the pullback of dtheta^dJ + dx^dz, with angle derivatives of the
sampled maps taken spectrally on that grid.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from apseries import Analyticity, SeriesSpace, TorusSeries
from constants import (
    FLOW_ATOL,
    FLOW_RTOL,
    GAUSS_LEGENDRE_NODES,
    SPECTRAL_THRESHOLD,
)
from errors import FlowEscape, SmallnessViolated
from kam.base import Generator

logger = logging.getLogger(__name__)


def next_pow2(n: int) -> int:
    return 1 << max(0, (int(n) - 1).bit_length())


def gauss_legendre_times(count: int = GAUSS_LEGENDRE_NODES) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the Gauss-Legendre rule on [0, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(count)
    return 0.5 * (nodes + 1.0), 0.5 * weights


@dataclass
class FlowGrid:
    """Tensor grid of angles over the active columns of a series space"""

    space: SeriesSpace
    sizes: Tuple[int, ...]

    @classmethod
    def for_series(
        cls,
        space: SeriesSpace,
        series: Sequence[TorusSeries] = (),
        generator: Optional[Generator] = None,
    ) -> "FlowGrid":
        """
        Per column, 2 x the maximum retained order + 1 rounded up to a power
        of two, where the generator's orders count twice.
        """
        band = np.zeros(space.dim, dtype=np.int64)
        for s in series:
            if s.size:
                band = np.maximum(band, np.abs(s.modes).max(axis=0))
        if generator is not None and not generator.is_zero():
            band = band + 2 * np.abs(generator.series.modes).max(axis=0)
        sizes = tuple(1 if b == 0 else next_pow2(2 * int(b) + 1) for b in band)
        return cls(space, sizes)

    @property
    def active(self) -> Tuple[int, ...]:
        return tuple(c for c, n in enumerate(self.sizes) if n > 1)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.sizes[c] for c in self.active)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.active else 1

    @cached_property
    def points(self) -> np.ndarray:
        """Grid angles, shape (G, dim), zero on inactive columns."""
        out = np.zeros((self.size, self.space.dim))
        if self.active:
            axes = [2.0 * np.pi * np.arange(self.sizes[c]) / self.sizes[c] for c in self.active]
            mesh = np.meshgrid(*axes, indexing="ij")
            for c, m in zip(self.active, mesh):
                out[:, c] = m.reshape(-1)
        return out

    @property
    def theta(self) -> np.ndarray:
        return self.points[:, : self.space.lam]

    @property
    def x(self) -> np.ndarray:
        return self.points[:, self.space.lam :]

    def derivative(self, values: np.ndarray) -> np.ndarray:
        """
        Spectral partial derivatives of periodic grid samples (G, ...) along
        every column, shape (G, ..., dim); zero on inactive columns.
        """
        out = np.zeros(values.shape + (self.space.dim,))
        if not self.active:
            return out
        cube = values.reshape(self.shape + values.shape[1:])
        axes = tuple(range(len(self.active)))
        coeffs = np.fft.fftn(cube, axes=axes)
        for axis, c in enumerate(self.active):
            size = self.sizes[c]
            k = np.fft.fftfreq(size) * size
            if size % 2 == 0:
                k[size // 2] = 0.0
            shape = [1] * cube.ndim
            shape[axis] = size
            d = np.fft.ifftn(coeffs * (1j * k).reshape(shape), axes=axes).real
            out[..., c] = d.reshape(values.shape)
        return out

    def to_series(self, values: np.ndarray, analyticity: Optional[Analyticity] = None) -> TorusSeries:
        """
        Fourier coefficients of grid samples (G, P, Q), thresholded at
        SPECTRAL_THRESHOLD relative to the largest coefficient.
        """
        P, Q = values.shape[1], values.shape[2]
        if self.active:
            axes = tuple(range(len(self.active)))
            coeffs = np.fft.fftn(values.reshape(self.shape + (P, Q)), axes=axes) / self.size
            coeffs = coeffs.reshape(self.size, P, Q)
            freqs = [np.rint(np.fft.fftfreq(self.sizes[c]) * self.sizes[c]).astype(np.int64) for c in self.active]
            mesh = np.meshgrid(*freqs, indexing="ij")
            modes = np.zeros((self.size, self.space.dim), dtype=np.int64)
            for c, m in zip(self.active, mesh):
                modes[:, c] = m.reshape(-1)
        else:
            coeffs = values.astype(complex)
            modes = np.zeros((1, self.space.dim), dtype=np.int64)
        peak = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
        if peak == 0.0:
            return TorusSeries.zero(self.space, analyticity)
        keep = np.max(np.abs(coeffs), axis=(1, 2)) > SPECTRAL_THRESHOLD * peak
        coeffs = np.where(np.abs(coeffs) > SPECTRAL_THRESHOLD * peak, coeffs, 0.0)
        return TorusSeries(self.space, modes[keep], coeffs[keep], analyticity)


@dataclass
class TransformationMap:
    """
    Sampled time-t maps of a generator flow.

    Arrays are indexed (time, grid point, node, ...):
        x   (T, G, P, n)        U1, the moved internal angles
        jac (T, G, P, n, n)     dx(t)/dx0
        u2  (T, G, P, L)        J shift
        u3  (T, G, P, L, n)     J dependence on z0
        u4  (T, G, P, n)        z shift
        u5  (T, G, P, n, n)     z linear part
    """

    grid: FlowGrid
    times: np.ndarray
    x: np.ndarray
    jac: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    u4: np.ndarray
    u5: np.ndarray
    symplectic_residual: float

    def time_index(self, t: float) -> int:
        hits = np.nonzero(np.isclose(self.times, t, rtol=0.0, atol=1e-12))[0]
        if not hits.size:
            raise KeyError(f"time {t} not sampled")
        return int(hits[0])

    def x_shift(self, index: int = -1) -> np.ndarray:
        return self.x[index] - self.grid.x[:, None, :]

    def displacement(self, rho: float, s: float, index: int = -1) -> float:
        """Weighted sup of (Phi - id) on the grid: max(|dx|/rho, 2|dz|/s, 2|dJ|/s)."""
        dx = float(np.max(np.abs(self.x_shift(index)), initial=0.0))
        eye = np.eye(self.u5.shape[-1])
        dz = float(
            np.max(
                np.abs(self.u4[index]).max(axis=-1, initial=0.0)
                + s * np.abs(self.u5[index] - eye).sum(axis=-1).max(axis=-1, initial=0.0),
                initial=0.0,
            )
        )
        dJ = float(
            np.max(
                np.abs(self.u2[index]).max(axis=-1, initial=0.0)
                + s * np.abs(self.u3[index]).sum(axis=-1).max(axis=-1, initial=0.0),
                initial=0.0,
            )
        )
        return max(dx / rho, 2.0 * dz / s, 2.0 * dJ / s)

    def to_series(self, name: str, component: Tuple[int, ...] = (0,), index: int = -1) -> TorusSeries:
        """Fourier series (z-free) of one scalar component: U1 is returned as the shift x - x0."""
        if name == "U1":
            data = self.x_shift(index)
        else:
            data = {"U2": self.u2, "U3": self.u3, "U4": self.u4, "U5": self.u5}[name][index]
        values = data[(slice(None), slice(None)) + tuple(component)]
        block = np.zeros(values.shape + (self.grid.space.basis.size,), dtype=complex)
        block[..., 0] = values
        return self.grid.to_series(block)

    def pullback_residual(self) -> float:
        """
        Largest entry of D^T Omega D - Omega over the sampled times, grid
        points and nodes, where D is the Jacobian of

            (theta, x, J, z) -> (theta, U1, J + U2 + U3 z, U4 + U5 z)

        and Omega the matrix of dtheta^dJ + dx^dz. The pullback is affine in
        z, so it is checked at z = 0 and at each unit vector.
        """
        L, n = self.grid.space.lam, self.grid.space.n
        a, N = L + n, 2 * (L + n)
        omega = np.zeros((N, N))
        omega[:a, a:] = np.eye(a)
        omega[a:, :a] = -np.eye(a)
        worst = 0.0
        for t in range(len(self.times)):
            dx = self.grid.derivative(self.x_shift(t))
            du2 = self.grid.derivative(self.u2[t])
            du3 = self.grid.derivative(self.u3[t])
            du4 = self.grid.derivative(self.u4[t])
            du5 = self.grid.derivative(self.u5[t])
            for z0 in [np.zeros(n)] + list(np.eye(n)):
                D = np.zeros(dx.shape[:2] + (N, N))
                D[..., :L, :L] = np.eye(L)
                D[..., L:a, :L] = dx[..., :L]
                D[..., L:a, L:a] = self.jac[t]
                D[..., a : N - n, :a] = du2 + np.einsum("gplkd,k->gpld", du3, z0)
                D[..., a : N - n, a : N - n] = np.eye(L)
                D[..., a : N - n, N - n :] = self.u3[t]
                D[..., N - n :, :a] = du4 + np.einsum("gpikd,k->gpid", du5, z0)
                D[..., N - n :, N - n :] = self.u5[t]
                pulled = np.einsum("gpji,jk,gpkl->gpil", D, omega, D)
                worst = max(worst, float(np.max(np.abs(pulled - omega))))
        return worst


class _FieldEvaluator:
    """Values and derivatives of F0 and F1 along moving internal angles"""

    def __init__(self, generator: Generator, grid: FlowGrid):
        modes, self.c0, self.c1 = generator.coefficient_arrays()
        lam = grid.space.lam
        self.ik = 1j * modes[:, :lam].astype(float)
        self.ikt = 1j * modes[:, lam:].astype(float)
        self.kt = modes[:, lam:].astype(float)
        self.theta_phase = grid.theta @ modes[:, :lam].T.astype(float)

    def __call__(self, x: np.ndarray):
        phase = np.exp(1j * (self.theta_phase[:, None, :] + np.einsum("gpn,mn->gpm", x, self.kt)))
        f1 = np.einsum("gpm,mpj->gpj", phase, self.c1).real
        a = np.einsum("gpm,mpj,mi->gpij", phase, self.c1, self.ikt).real
        d0x = np.einsum("gpm,mp,mi->gpi", phase, self.c0, self.ikt).real
        d0t = np.einsum("gpm,mp,ml->gpl", phase, self.c0, self.ik).real
        d1t = np.einsum("gpm,mpj,ml->gplj", phase, self.c1, self.ik).real
        return f1, a, d0x, d0t, d1t


def _identity_map(grid: FlowGrid, times: np.ndarray, P: int) -> TransformationMap:
    n, L, G, T = grid.space.n, grid.space.lam, grid.size, len(times)
    eye = np.broadcast_to(np.eye(n), (T, G, P, n, n)).copy()
    x = np.broadcast_to(grid.x[None, :, None, :], (T, G, P, n)).copy()
    return TransformationMap(
        grid=grid,
        times=times,
        x=x,
        jac=eye.copy(),
        u2=np.zeros((T, G, P, L)),
        u3=np.zeros((T, G, P, L, n)),
        u4=np.zeros((T, G, P, n)),
        u5=eye,
        symplectic_residual=0.0,
    )


def flow_time1(
    generator: Generator,
    grid: Optional[FlowGrid] = None,
    times: Optional[Sequence[float]] = None,
    smallness: Optional[float] = None,
    max_shift: Optional[float] = None,
) -> TransformationMap:
    """
    Integrate the flow of F up to t = 1, sampling the requested times.

    Args:
            generator: F = F0 + <F1, z>
            grid: Sampling grid (default: sized from F alone)
            times: Sample times in (0, 1]; t = 1 is always included
            smallness: The value 16 Gamma_mu Gamma_rho E, required <= 1
            max_shift: Largest admissible |x(t) - x0| (the analyticity loss)

    Raises:
            SmallnessViolated: If smallness exceeds 1
            FlowEscape: If the integration fails or a trajectory leaves the strip
    """
    if smallness is not None and smallness > 1.0:
        raise SmallnessViolated(f"16 Gamma_mu Gamma_rho E = {smallness:.4g} exceeds 1")
    space = generator.series.space
    if grid is None:
        grid = FlowGrid.for_series(space, (), generator)
    sample = sorted(set([float(t) for t in (times if times is not None else [])] + [1.0]))
    times_arr = np.asarray(sample)
    P = space.grid.size
    if generator.is_zero():
        return _identity_map(grid, times_arr, P)

    n, L, G = space.n, space.lam, grid.size
    field = _FieldEvaluator(generator, grid)
    layout = [(G, P, n), (G, P, n, n), (G, P, n), (G, P, n, n), (G, P, L), (G, P, L, n)]
    sizes = [int(np.prod(s)) for s in layout]
    offsets = np.cumsum([0] + sizes)

    def unpack(y):
        return [y[offsets[i] : offsets[i + 1]].reshape(layout[i]) for i in range(len(layout))]

    def rhs(_t, y):
        x, Y, u4, u5, u2, u3 = unpack(y)
        f1, a, d0x, d0t, d1t = field(x)
        dY = np.einsum("gpji,gpjk->gpik", a, Y)
        du4 = -d0x - np.einsum("gpij,gpj->gpi", a, u4)
        du5 = -np.einsum("gpij,gpjk->gpik", a, u5)
        du2 = -d0t - np.einsum("gplj,gpj->gpl", d1t, u4)
        du3 = -np.einsum("gplj,gpjk->gplk", d1t, u5)
        return np.concatenate([f1.ravel(), dY.ravel(), du4.ravel(), du5.ravel(), du2.ravel(), du3.ravel()])

    eye = np.broadcast_to(np.eye(n), (G, P, n, n))
    x0 = np.broadcast_to(grid.x[:, None, :], (G, P, n))
    y0 = np.concatenate(
        [x0.ravel(), eye.ravel(), np.zeros(G * P * n), eye.ravel(), np.zeros(G * P * L), np.zeros(G * P * L * n)]
    )
    logger.debug("integrating generator flow on %d grid points x %d nodes", G, P)
    sol = solve_ivp(
        rhs, (0.0, 1.0), y0, method="DOP853", t_eval=times_arr, rtol=FLOW_RTOL, atol=FLOW_ATOL
    )
    if not sol.success or not np.all(np.isfinite(sol.y)):
        raise FlowEscape(f"Generator flow integration failed: {sol.message}")

    parts = [np.stack([unpack(sol.y[:, i])[k] for i in range(len(times_arr))]) for k in range(6)]
    x, jac, u4, u5, u2, u3 = parts
    shift = float(np.max(np.abs(x - x0[None]), initial=0.0))
    if max_shift is not None and shift > max_shift:
        raise FlowEscape(f"Trajectory moved by {shift:.4g}, beyond the admissible {max_shift:.4g}")

    flow_map = TransformationMap(grid, times_arr, x, jac, u2, u3, u4, u5, 0.0)
    flow_map.symplectic_residual = flow_map.pullback_residual()
    logger.debug("flow done: max shift %.3e, symplectic residual %.3e", shift, flow_map.symplectic_residual)
    return flow_map


def compose(series: TorusSeries, flow_map: TransformationMap, index: int = -1) -> np.ndarray:
    """
    Samples of series o Phi^t on the flow grid as z-polynomials, shape (G, P, Q).
    """
    grid = flow_map.grid
    if series.is_zero():
        return np.zeros((grid.size, series.space.grid.size, series.space.basis.size), dtype=complex)
    lam = series.space.lam
    k = series.modes[:, :lam].astype(float)
    kt = series.modes[:, lam:].astype(float)
    phase = np.exp(
        1j * ((grid.theta @ k.T)[:, None, :] + np.einsum("gpn,mn->gpm", flow_map.x[index], kt))
    )
    sampled = np.einsum("gpm,mpq->gpq", phase, series.coeffs)
    return series.space.basis.compose_affine(sampled, flow_map.u4[index], flow_map.u5[index])
