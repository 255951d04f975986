# src/apseries.py
"""
Finite almost-periodic and torus Fourier-Taylor series.

A TorusSeries represents

    sum over (k, k~) of P_{k,k~}(z; w~) exp(i(<k, theta> + <k~, x>))

with theta indexed by the lattice window, x the n internal angles, and each
coefficient a polynomial in z of total degree at most D sampled on a
Chebyshev grid of parameter values w~. Every mode is stored once and belongs
to its home component (the minimum-weight product set covering its
support), which is what the weighted norms sum over.
"""
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import product as cartesian
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from constants import DEFAULT_CHEBYSHEV_NODES, DEFAULT_Z_DEGREE, IMAG_RESIDUE_TOL
from errors import ConfigValidationError, DomainViolation, NoCoveringSet, PropertyViolation, SupportOverflow
from lattice import IndexWindow, ProductStructure


# =============================================================================
# Frequencies
# =============================================================================
@dataclass(frozen=True)
class Frequency:
    """Frequency vector omega over the lattice window"""

    window: IndexWindow
    values: Tuple[float, ...]
    certificate: Optional[object] = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.values) != self.window.size:
            raise ConfigValidationError(
                f"Frequency has {len(self.values)} entries for window of size "
                f"{self.window.size}"
            )
        if not all(math.isfinite(v) for v in self.values):
            raise ConfigValidationError("Frequency entries must be finite")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.array)))

    def scaled(self, factor: float) -> "Frequency":
        return Frequency(self.window, tuple(factor * v for v in self.values))

    def with_certificate(self, certificate) -> "Frequency":
        return replace(self, certificate=certificate)

    @classmethod
    def from_dict(cls, data: Mapping) -> "Frequency":
        lo, hi = data["window"]
        return cls(IndexWindow(int(lo), int(hi)), tuple(float(v) for v in data["omega"]))

    def to_dict(self) -> Dict:
        return {"window": [self.window.lo, self.window.hi], "omega": list(self.values)}


# =============================================================================
# z-polynomials
# =============================================================================
class MonomialBasis:
    """Monomials z**alpha in n variables with total degree at most D"""

    def __init__(self, n: int, degree: int = DEFAULT_Z_DEGREE):
        if n < 1 or degree < 1:
            raise ConfigValidationError("MonomialBasis needs n >= 1 and degree >= 1")
        self.n = n
        self.degree = degree
        exps = [
            alpha
            for alpha in cartesian(range(degree + 1), repeat=n)
            if sum(alpha) <= degree
        ]
        exps.sort(key=lambda a: (sum(a), tuple(-x for x in a)))
        self.exponents: List[Tuple[int, ...]] = exps
        self.index: Dict[Tuple[int, ...], int] = {a: q for q, a in enumerate(exps)}
        self.degrees = np.array([sum(a) for a in exps], dtype=np.int64)
        self.size = len(exps)

        triples = []
        for i, a in enumerate(exps):
            for j, b in enumerate(exps):
                c = tuple(x + y for x, y in zip(a, b))
                if c in self.index:
                    triples.append((i, j, self.index[c]))
        self._triples = np.array(triples, dtype=np.int64)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MonomialBasis)
            and self.n == other.n
            and self.degree == other.degree
        )

    def __hash__(self) -> int:
        return hash((self.n, self.degree))

    def unit(self, i: int) -> int:
        """Index of the monomial z_i (0-based variable)."""
        alpha = [0] * self.n
        alpha[i] = 1
        return self.index[tuple(alpha)]

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Truncated product along the last axis."""
        shape = np.broadcast_shapes(a.shape, b.shape)
        out = np.zeros(shape, dtype=np.result_type(a, b, complex))
        for i, j, k in self._triples:
            out[..., k] += a[..., i] * b[..., j]
        return out

    def derivative(self, a: np.ndarray, i: int) -> np.ndarray:
        out = np.zeros_like(a)
        for q, alpha in enumerate(self.exponents):
            if alpha[i] > 0:
                lower = list(alpha)
                lower[i] -= 1
                out[..., self.index[tuple(lower)]] += alpha[i] * a[..., q]
        return out

    def majorant(self, a: np.ndarray, s: float) -> np.ndarray:
        """Sum of |coefficient| * s**degree along the last axis."""
        return np.sum(np.abs(a) * float(s) ** self.degrees, axis=-1)

    def monomials(self, z: np.ndarray) -> np.ndarray:
        """Values of every monomial at z (..., n) -> (..., Q)."""
        z = np.asarray(z)
        out = np.ones(z.shape[:-1] + (self.size,), dtype=np.result_type(z, float))
        for q, alpha in enumerate(self.exponents):
            for i, p in enumerate(alpha):
                if p:
                    out[..., q] = out[..., q] * z[..., i] ** p
        return out

    def degree_mask(self, max_degree: int) -> np.ndarray:
        return self.degrees <= max_degree

    def compose_affine(
        self, a: np.ndarray, shift: np.ndarray, matrix: np.ndarray
    ) -> np.ndarray:
        """
        Coefficients of p(shift + matrix @ z) for p given by a.

        Args:
                a: (..., Q) polynomial coefficients
                shift: (..., n) constant parts
                matrix: (..., n, n) linear parts

        Returns:
                (..., Q) coefficients, truncated at the basis degree
        """
        lead = a.shape[:-1]
        linear = []
        for i in range(self.n):
            li = np.zeros(lead + (self.size,), dtype=complex)
            li[..., 0] = shift[..., i]
            for j in range(self.n):
                li[..., self.unit(j)] = matrix[..., i, j]
            linear.append(li)

        one = np.zeros(lead + (self.size,), dtype=complex)
        one[..., 0] = 1.0
        powers = []
        for i in range(self.n):
            row = [one]
            for _ in range(self.degree):
                row.append(self.multiply(row[-1], linear[i]))
            powers.append(row)

        out = np.zeros(lead + (self.size,), dtype=complex)
        for q, alpha in enumerate(self.exponents):
            coeff = a[..., q]
            if not np.any(coeff):
                continue
            term = powers[0][alpha[0]]
            for i in range(1, self.n):
                term = self.multiply(term, powers[i][alpha[i]])
            out += coeff[..., None] * term
        return out


# =============================================================================
# Parameter grids
# =============================================================================
def _lobatto_nodes(lo: float, hi: float, count: int) -> Tuple[np.ndarray, np.ndarray]:
    if count == 1 or lo == hi:
        return np.array([0.5 * (lo + hi)]), np.array([1.0])
    j = np.arange(count)
    nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * j / (count - 1))
    weights = (-1.0) ** j
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return nodes, weights


class ParameterGrid:
    """Tensor Chebyshev-Lobatto grid over a box of parameter values"""

    def __init__(
        self,
        lower: Sequence[float],
        upper: Sequence[float],
        nodes_per_dim: int = DEFAULT_CHEBYSHEV_NODES,
    ):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise ConfigValidationError("ParameterGrid bounds must satisfy lower <= upper")
        self.nodes_per_dim = nodes_per_dim
        self._axes = [
            _lobatto_nodes(lo, hi, nodes_per_dim) for lo, hi in zip(self.lower, self.upper)
        ]
        mesh = np.meshgrid(*[ax[0] for ax in self._axes], indexing="ij")
        self.nodes = np.stack([m.reshape(-1) for m in mesh], axis=-1)

    @classmethod
    def single(cls, point: Sequence[float]) -> "ParameterGrid":
        return cls(point, point, 1)

    @classmethod
    def around(
        cls, center: Sequence[float], half_width: float, nodes_per_dim: int = DEFAULT_CHEBYSHEV_NODES
    ) -> "ParameterGrid":
        center = np.asarray(center, dtype=float)
        if half_width <= 0:
            return cls.single(center)
        return cls(center - half_width, center + half_width, nodes_per_dim)

    @property
    def n(self) -> int:
        return self.nodes.shape[1]

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def scaled(self, factor: float) -> "ParameterGrid":
        a, b = factor * self.lower, factor * self.upper
        return ParameterGrid(np.minimum(a, b), np.maximum(a, b), self.nodes_per_dim)

    def lagrange_weights(self, point: Sequence[float]) -> np.ndarray:
        """Barycentric interpolation weights of every node at point, shape (P,)."""
        point = np.asarray(point, dtype=float)
        per_dim = []
        for (nodes, bary), x in zip(self._axes, point):
            if len(nodes) == 1:
                per_dim.append(np.array([1.0]))
                continue
            diff = x - nodes
            hit = np.nonzero(diff == 0.0)[0]
            if hit.size:
                w = np.zeros(len(nodes))
                w[hit[0]] = 1.0
            else:
                terms = bary / diff
                w = terms / np.sum(terms)
            per_dim.append(w)
        weights = per_dim[0]
        for w in per_dim[1:]:
            weights = np.multiply.outer(weights, w).reshape(-1)
        return weights

    def interpolation_matrix(self, points: np.ndarray) -> np.ndarray:
        """Rows of Lagrange weights for each point, shape (M, P)."""
        return np.stack([self.lagrange_weights(p) for p in np.atleast_2d(points)])

    def interpolate(self, values: np.ndarray, point: Sequence[float]) -> np.ndarray:
        """Interpolate node values (P, ...) at point."""
        return np.tensordot(self.lagrange_weights(point), values, axes=(0, 0))

    def to_dict(self) -> Dict:
        return {
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "nodes_per_dim": self.nodes_per_dim,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ParameterGrid":
        return cls(data["lower"], data["upper"], int(data.get("nodes_per_dim", 1)))


# =============================================================================
# Series space and analyticity
# =============================================================================
@dataclass(frozen=True)
class Analyticity:
    """Domain parameters (m, r, s, h, w) of a series"""

    m: float
    r: float
    s: float
    h: float = 0.0
    w: float = 0.0


@dataclass(frozen=True, eq=False)
class SeriesSpace:
    """Product structure, z-basis and parameter grid shared by related series"""

    structure: ProductStructure
    basis: MonomialBasis
    grid: ParameterGrid

    def __post_init__(self):
        if self.basis.n != self.structure.n or self.grid.n != self.structure.n:
            raise ConfigValidationError(
                "Basis, grid and angle block must agree on the number of angles"
            )

    @property
    def window(self) -> IndexWindow:
        return self.structure.window

    @property
    def lam(self) -> int:
        return self.structure.window.size

    @property
    def n(self) -> int:
        return self.structure.n

    @property
    def dim(self) -> int:
        return self.structure.dim

    def with_grid(self, grid: ParameterGrid) -> "SeriesSpace":
        return SeriesSpace(self.structure, self.basis, grid)

    def home_of(self, mode: np.ndarray) -> int:
        support = [self.window.lo + p for p in np.nonzero(mode[: self.lam])[0]]
        try:
            return self.structure.home_component(support)
        except NoCoveringSet as e:
            raise SupportOverflow(
                f"Mode {mode.tolist()} has a support covered by no component"
            ) from e


def _as_coeff_block(space: SeriesSpace, value) -> np.ndarray:
    """Broadcast a scalar, (Q,) or (P, Q) coefficient into shape (P, Q)."""
    P, Q = space.grid.size, space.basis.size
    arr = np.asarray(value, dtype=complex)
    if arr.ndim == 0:
        block = np.zeros((P, Q), dtype=complex)
        block[:, 0] = arr
        return block
    if arr.ndim == 1:
        if arr.shape[0] > Q:
            raise ConfigValidationError("z-polynomial exceeds the degree cap")
        block = np.zeros((P, Q), dtype=complex)
        block[:, : arr.shape[0]] = arr
        return block
    return np.broadcast_to(arr, (P, Q)).astype(complex)


# =============================================================================
# Torus series
# =============================================================================
class TorusSeries:
    """
    Immutable finite Fourier-Taylor series over a SeriesSpace.

    modes:  (M, dim) integer array, window columns then angle columns
    coeffs: (M, P, Q) complex array, P parameter nodes by Q monomials
    """

    def __init__(
        self,
        space: SeriesSpace,
        modes: np.ndarray,
        coeffs: np.ndarray,
        analyticity: Optional[Analyticity] = None,
        canonical: bool = False,
    ):
        modes = np.asarray(modes, dtype=np.int64).reshape(-1, space.dim)
        coeffs = np.asarray(coeffs, dtype=complex).reshape(
            modes.shape[0], space.grid.size, space.basis.size
        )
        if not canonical and modes.shape[0]:
            unique, inverse = np.unique(modes, axis=0, return_inverse=True)
            inverse = np.asarray(inverse).reshape(-1)
            summed = np.zeros((unique.shape[0],) + coeffs.shape[1:], dtype=complex)
            np.add.at(summed, inverse, coeffs)
            keep = np.any(summed != 0, axis=(1, 2))
            modes, coeffs = unique[keep], summed[keep]
        self.space = space
        self.modes = modes
        self.coeffs = coeffs
        self.analyticity = analyticity
        self.components  # resolve homes eagerly so overflow surfaces here

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------
    @classmethod
    def zero(cls, space: SeriesSpace, analyticity: Optional[Analyticity] = None) -> "TorusSeries":
        return cls(
            space,
            np.zeros((0, space.dim), dtype=np.int64),
            np.zeros((0, space.grid.size, space.basis.size), dtype=complex),
            analyticity,
            canonical=True,
        )

    @classmethod
    def from_terms(
        cls,
        space: SeriesSpace,
        terms: Iterable[Tuple[Sequence[int], object]],
        analyticity: Optional[Analyticity] = None,
    ) -> "TorusSeries":
        """Build from (dense mode, coefficient) pairs; coefficients may be scalar, (Q,) or (P, Q)."""
        modes, blocks = [], []
        for mode, value in terms:
            modes.append(np.asarray(mode, dtype=np.int64))
            blocks.append(_as_coeff_block(space, value))
        if not modes:
            return cls.zero(space, analyticity)
        return cls(space, np.stack(modes), np.stack(blocks), analyticity)

    @classmethod
    def constant(cls, space: SeriesSpace, value, analyticity=None) -> "TorusSeries":
        return cls.from_terms(space, [(np.zeros(space.dim, dtype=np.int64), value)], analyticity)

    @classmethod
    def cosine(
        cls, space: SeriesSpace, mode: Sequence[int], amplitude=1.0, analyticity=None
    ) -> "TorusSeries":
        """amplitude * cos(<mode, (theta, x)>); amplitude may be a z-polynomial."""
        mode = np.asarray(mode, dtype=np.int64)
        block = 0.5 * _as_coeff_block(space, amplitude)
        return cls.from_terms(space, [(mode, block), (-mode, block)], analyticity)

    @classmethod
    def sine(
        cls, space: SeriesSpace, mode: Sequence[int], amplitude=1.0, analyticity=None
    ) -> "TorusSeries":
        """amplitude * sin(<mode, (theta, x)>)."""
        mode = np.asarray(mode, dtype=np.int64)
        block = _as_coeff_block(space, amplitude)
        return cls.from_terms(
            space, [(mode, block / 2j), (-mode, -block / 2j)], analyticity
        )

    def _new(self, modes, coeffs, canonical=False) -> "TorusSeries":
        return TorusSeries(self.space, modes, coeffs, self.analyticity, canonical)

    def with_analyticity(self, analyticity: Analyticity) -> "TorusSeries":
        return TorusSeries(self.space, self.modes, self.coeffs, analyticity, canonical=True)

    # ------------------------------------------------------------------
    # structure
    # ------------------------------------------------------------------
    @property
    def size(self) -> int:
        return self.modes.shape[0]

    def is_zero(self) -> bool:
        return self.size == 0

    @cached_property
    def components(self) -> np.ndarray:
        return np.array([self.space.home_of(m) for m in self.modes], dtype=np.int64)

    @property
    def orders(self) -> np.ndarray:
        return np.abs(self.modes).sum(axis=1)

    def max_order(self) -> int:
        return int(self.orders.max()) if self.size else 0

    def mode_index(self, mode: Sequence[int]) -> Optional[int]:
        hits = np.nonzero(np.all(self.modes == np.asarray(mode), axis=1))[0]
        return int(hits[0]) if hits.size else None

    def coefficient(self, mode: Sequence[int]) -> np.ndarray:
        """(P, Q) coefficient block of a mode, zeros if absent."""
        idx = self.mode_index(mode)
        if idx is None:
            return np.zeros((self.space.grid.size, self.space.basis.size), dtype=complex)
        return self.coeffs[idx]

    def mean(self) -> np.ndarray:
        return self.coefficient(np.zeros(self.space.dim, dtype=np.int64))

    def filter_modes(self, mask: np.ndarray) -> "TorusSeries":
        return self._new(self.modes[mask], self.coeffs[mask], canonical=True)

    def truncate_degree(self, max_degree: int) -> "TorusSeries":
        coeffs = self.coeffs * self.space.basis.degree_mask(max_degree)
        return self._new(self.modes, coeffs)

    def degree_part(self, degree: int) -> "TorusSeries":
        coeffs = self.coeffs * (self.space.basis.degrees == degree)
        return self._new(self.modes, coeffs)

    def is_real(self, tol: float = IMAG_RESIDUE_TOL) -> bool:
        """Conjugate symmetry c_{-m} = conj(c_m) for every stored mode."""
        scale = max(1.0, float(np.max(np.abs(self.coeffs)))) if self.size else 1.0
        lookup = {tuple(m): i for i, m in enumerate(self.modes.tolist())}
        for i, m in enumerate(self.modes.tolist()):
            j = lookup.get(tuple(-x for x in m))
            if j is None:
                return False
            if np.max(np.abs(self.coeffs[j] - np.conj(self.coeffs[i]))) > tol * scale:
                return False
        return True

    # ------------------------------------------------------------------
    # arithmetic
    # ------------------------------------------------------------------
    def _check_space(self, other: "TorusSeries") -> None:
        if other.space is not self.space and (
            other.space.structure != self.space.structure
            or other.space.basis != self.space.basis
            or other.space.grid.size != self.space.grid.size
        ):
            raise ConfigValidationError("Series live in incompatible spaces")

    def __add__(self, other: "TorusSeries") -> "TorusSeries":
        self._check_space(other)
        return self._new(
            np.concatenate([self.modes, other.modes]),
            np.concatenate([self.coeffs, other.coeffs]),
        )

    def __neg__(self) -> "TorusSeries":
        return self._new(self.modes, -self.coeffs, canonical=True)

    def __sub__(self, other: "TorusSeries") -> "TorusSeries":
        return self + (-other)

    def add(self, other: "TorusSeries") -> "TorusSeries":
        return self + other

    def scale(self, factor) -> "TorusSeries":
        """Multiply by a scalar or by per-node values of shape (P,)."""
        factor = np.asarray(factor, dtype=complex)
        if factor.ndim == 1:
            factor = factor[None, :, None]
        return self._new(self.modes, self.coeffs * factor)

    def multiply(self, other: "TorusSeries", order_cap: Optional[int] = None) -> "TorusSeries":
        """
        Convolution product truncated at the z-degree cap and the order cap.

        Raises:
                SupportOverflow: If a product mode is covered by no component
        """
        self._check_space(other)
        if self.is_zero() or other.is_zero():
            return TorusSeries.zero(self.space, self.analyticity)
        basis = self.space.basis
        mb = other.modes.shape[0]
        chunk = max(1, int(4_000_000 // max(1, mb * self.coeffs.shape[1] * basis.size)))
        modes_out, coeffs_out = [], []
        for start in range(0, self.size, chunk):
            ma = self.modes[start : start + chunk]
            ca = self.coeffs[start : start + chunk]
            modes = (ma[:, None, :] + other.modes[None, :, :]).reshape(-1, self.space.dim)
            coeffs = basis.multiply(ca[:, None, :, :], other.coeffs[None, :, :, :])
            coeffs = coeffs.reshape((-1,) + coeffs.shape[2:])
            if order_cap is not None:
                keep = np.abs(modes).sum(axis=1) <= order_cap
                modes, coeffs = modes[keep], coeffs[keep]
            modes_out.append(modes)
            coeffs_out.append(coeffs)
        return self._new(np.concatenate(modes_out), np.concatenate(coeffs_out))

    def __mul__(self, other: "TorusSeries") -> "TorusSeries":
        return self.multiply(other)

    def derivative(self, var: Tuple[str, int]) -> "TorusSeries":
        """
        Partial derivative by ("theta", window index), ("x", i) or ("z", i), i >= 1.
        """
        kind, index = var
        if kind == "theta":
            column = self.space.window.position(index)
            factor = 1j * self.modes[:, column]
            return self._new(self.modes, self.coeffs * factor[:, None, None])
        if kind == "x":
            column = self.space.lam + index - 1
            factor = 1j * self.modes[:, column]
            return self._new(self.modes, self.coeffs * factor[:, None, None])
        if kind == "z":
            return self._new(self.modes, self.space.basis.derivative(self.coeffs, index - 1))
        raise ConfigValidationError(f"Unknown derivative variable: {var}")

    def reparametrize(self, matrix: np.ndarray) -> "TorusSeries":
        """Resample coefficients on new nodes given a (P_new, P_old) interpolation matrix."""
        coeffs = np.einsum("np,mpq->mnq", matrix, self.coeffs)
        return self._new(self.modes, coeffs)

    # ------------------------------------------------------------------
    # norms
    # ------------------------------------------------------------------
    def _domain(self, m=None, r=None, s=None) -> Tuple[float, float, float]:
        a = self.analyticity
        if a is not None:
            m = a.m if m is None else m
            r = a.r if r is None else r
            s = a.s if s is None else s
        if r is None or s is None:
            raise ConfigValidationError("Norm requires r and s (series has no analyticity)")
        return (0.0 if m is None else m), r, s

    def mode_majorants(self, s: float) -> np.ndarray:
        """|P_{k,k~}|_{s,h} per mode: majorant maximized over parameter nodes."""
        if self.is_zero():
            return np.zeros(0)
        return np.max(self.space.basis.majorant(self.coeffs, s), axis=1)

    def component_norms(self, r: Optional[float] = None, s: Optional[float] = None) -> np.ndarray:
        _, r, s = self._domain(None, r, s)
        out = np.zeros(len(self.space.structure.base.subsets))
        if self.is_zero():
            return out
        weighted = self.mode_majorants(s) * np.exp(r * self.orders)
        np.add.at(out, self.components, weighted)
        return out

    def norm_component(self, component: int, r: Optional[float] = None, s: Optional[float] = None) -> float:
        return float(self.component_norms(r, s)[component])

    def norm_total(self, m: Optional[float] = None, r: Optional[float] = None, s: Optional[float] = None) -> float:
        m, r, s = self._domain(m, r, s)
        weights = np.asarray(self.space.structure.component_weights)
        return float(np.sum(self.component_norms(r, s) * np.exp(m * weights)))

    def spectrum(self, s: float) -> List[Tuple[int, float]]:
        """(order, majorant) rows sorted by order for decay plots."""
        rows = sorted(zip(self.orders.tolist(), self.mode_majorants(s).tolist()))
        return [(int(o), float(v)) for o, v in rows]

    # ------------------------------------------------------------------
    # evaluation
    # ------------------------------------------------------------------
    def _node_weights(self, node: Optional[int], omega_tilde) -> np.ndarray:
        P = self.space.grid.size
        if omega_tilde is not None:
            return self.space.grid.lagrange_weights(omega_tilde)
        weights = np.zeros(P)
        weights[0 if node is None else node] = 1.0
        return weights

    def evaluate(
        self,
        theta: np.ndarray,
        x: np.ndarray,
        z: Optional[np.ndarray] = None,
        node: Optional[int] = None,
        omega_tilde: Optional[Sequence[float]] = None,
    ) -> np.ndarray:
        """
        Vectorized evaluation at G points.

        Args:
                theta: (G, |window|) angles
                x: (G, n) internal angles
                z: (G, n) actions, zeros when omitted
                node: Parameter node index (default 0)
                omega_tilde: Parameter value, interpolated on the grid

        Returns:
                (G,) complex values
        """
        theta = np.atleast_2d(np.asarray(theta))
        x = np.atleast_2d(np.asarray(x))
        if z is None:
            z = np.zeros((x.shape[0], self.space.n))
        z = np.atleast_2d(np.asarray(z))
        if self.is_zero():
            return np.zeros(theta.shape[0], dtype=complex)
        coeffs = np.tensordot(self._node_weights(node, omega_tilde), self.coeffs, axes=(0, 1))
        angles = np.concatenate([theta, x], axis=1)
        phases = np.exp(1j * angles @ self.modes.T)
        poly = self.space.basis.monomials(z) @ coeffs.T
        return np.sum(phases * poly, axis=1)

    def eval(self, theta, x, z=None, omega_tilde=None, node=None, real=None):
        """
        Value at a single point.

        At a real point the real part is returned when real is True, or when
        real is None and the series is conjugate-symmetric; otherwise the
        complex value.

        Raises:
                DomainViolation: If the point leaves the analyticity domain
                PropertyViolation: If a real value is due and the imaginary
                        residue exceeds IMAG_RESIDUE_TOL times the coefficient mass
        """
        theta = np.asarray(theta)
        x = np.asarray(x)
        z = np.zeros(self.space.n) if z is None else np.asarray(z)
        a = self.analyticity
        if a is not None:
            if np.max(np.abs(np.imag(np.concatenate([theta, x]))), initial=0.0) > a.r:
                raise DomainViolation(f"|Im angle| exceeds r={a.r}")
            if np.max(np.abs(z), initial=0.0) > a.s:
                raise DomainViolation(f"|z| exceeds s={a.s}")
        value = complex(self.evaluate(theta[None, :], x[None, :], z[None, :], node, omega_tilde)[0])
        real_point = not (np.iscomplexobj(theta) or np.iscomplexobj(x) or np.iscomplexobj(z))
        if real is None:
            real = self.is_real()
        if real_point and real:
            scale = max(1.0, float(np.sum(np.abs(self.coeffs))))
            if abs(value.imag) > IMAG_RESIDUE_TOL * scale:
                raise PropertyViolation(
                    f"Imaginary residue {value.imag:.3e} at a real point exceeds {IMAG_RESIDUE_TOL * scale:.3e}",
                    residue=value.imag,
                    bound=IMAG_RESIDUE_TOL * scale,
                )
            return value.real
        return value

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------
    def to_dict(self) -> Dict:
        """Components keyed by index, rows [k, k~, degree, node, re, im]."""
        components: Dict[str, List] = {}
        lam = self.space.lam
        for idx, (mode, block) in enumerate(zip(self.modes.tolist(), self.coeffs)):
            key = str(int(self.components[idx]))
            for p, q in zip(*np.nonzero(block)):
                c = block[p, q]
                components.setdefault(key, []).append(
                    [mode[:lam], mode[lam:], list(self.space.basis.exponents[q]), int(p), c.real, c.imag]
                )
        data = {
            "structure": self.space.structure.to_dict(),
            "degree": self.space.basis.degree,
            "grid": self.space.grid.to_dict(),
            "components": components,
        }
        if self.analyticity is not None:
            a = self.analyticity
            data["analyticity"] = {"m": a.m, "r": a.r, "s": a.s, "h": a.h, "w": a.w}
        return data

    @classmethod
    def from_dict(cls, data: Mapping, space: Optional[SeriesSpace] = None) -> "TorusSeries":
        if space is None:
            structure = ProductStructure.from_dict(data["structure"])
            space = SeriesSpace(
                structure,
                MonomialBasis(structure.n, int(data.get("degree", DEFAULT_Z_DEGREE))),
                ParameterGrid.from_dict(data["grid"]),
            )
        modes, blocks = [], []
        for rows in data.get("components", {}).values():
            for k, kt, degree, node, re, im in rows:
                block = np.zeros((space.grid.size, space.basis.size), dtype=complex)
                block[int(node), space.basis.index[tuple(degree)]] = complex(re, im)
                modes.append(list(k) + list(kt))
                blocks.append(block)
        analyticity = None
        if "analyticity" in data:
            analyticity = Analyticity(**data["analyticity"])
        if not modes:
            return cls.zero(space, analyticity)
        return cls(space, np.array(modes), np.stack(blocks), analyticity)


def poisson_bracket(f: TorusSeries, g: TorusSeries, order_cap: Optional[int] = None) -> TorusSeries:
    """
    {f, g} = <d_x f, d_z g> - <d_z f, d_x g>.

    Stored series carry no J-dependence, so the (theta, J) part vanishes here
    and enters only through the normal form.
    """
    result = TorusSeries.zero(f.space, f.analyticity)
    for i in range(1, f.space.n + 1):
        result = result + f.derivative(("x", i)).multiply(g.derivative(("z", i)), order_cap)
        result = result - f.derivative(("z", i)).multiply(g.derivative(("x", i)), order_cap)
    return result


# =============================================================================
# Almost-periodic functions of time
# =============================================================================
class AlmostPeriodicFunction:
    """
    Finite trigonometric sum p(t) = sum c_k exp(i <k, omega> t).

    The same coefficients define the shell function P(theta) on the torus,
    with p(t) = P(omega t).
    """

    def __init__(self, frequency: Frequency, modes: np.ndarray, coeffs: np.ndarray):
        modes = np.asarray(modes, dtype=np.int64).reshape(-1, frequency.window.size)
        coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        if modes.shape[0]:
            unique, inverse = np.unique(modes, axis=0, return_inverse=True)
            summed = np.zeros(unique.shape[0], dtype=complex)
            np.add.at(summed, np.asarray(inverse).reshape(-1), coeffs)
            keep = summed != 0
            modes, coeffs = unique[keep], summed[keep]
        self.frequency = frequency
        self.modes = modes
        self.coeffs = coeffs

    @classmethod
    def zero(cls, frequency: Frequency) -> "AlmostPeriodicFunction":
        return cls(frequency, np.zeros((0, frequency.window.size)), np.zeros(0))

    @classmethod
    def constant(cls, frequency: Frequency, value: float) -> "AlmostPeriodicFunction":
        return cls(frequency, np.zeros((1, frequency.window.size)), np.array([value]))

    @classmethod
    def from_cosines(
        cls, frequency: Frequency, terms: Iterable[Tuple[Sequence[int], float]]
    ) -> "AlmostPeriodicFunction":
        """Sum of amplitude * cos(<k, omega> t); k = 0 contributes a constant."""
        modes, coeffs = [], []
        for k, amplitude in terms:
            k = np.asarray(k, dtype=np.int64)
            if not np.any(k):
                modes.append(k)
                coeffs.append(amplitude)
                continue
            modes += [k, -k]
            coeffs += [0.5 * amplitude, 0.5 * amplitude]
        if not modes:
            return cls.zero(frequency)
        return cls(frequency, np.stack(modes), np.array(coeffs))

    @property
    def size(self) -> int:
        return self.modes.shape[0]

    def mode_frequencies(self) -> np.ndarray:
        return self.modes @ self.frequency.array

    def __call__(self, t) -> np.ndarray:
        """Real part of p at real times (vectorized)."""
        t = np.asarray(t, dtype=float)
        if not self.size:
            return np.zeros_like(t)
        phases = np.exp(1j * np.multiply.outer(t, self.mode_frequencies()))
        return np.real(phases @ self.coeffs)

    def shell(self, theta: np.ndarray) -> np.ndarray:
        """Shell function P(theta) at (G, |window|) torus points."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if not self.size:
            return np.zeros(theta.shape[0])
        return np.real(np.exp(1j * theta @ self.modes.T) @ self.coeffs)

    def mean(self) -> complex:
        hits = np.nonzero(~np.any(self.modes, axis=1))[0]
        return complex(self.coeffs[hits[0]]) if hits.size else 0j

    def __add__(self, other: "AlmostPeriodicFunction") -> "AlmostPeriodicFunction":
        return AlmostPeriodicFunction(
            self.frequency,
            np.concatenate([self.modes, other.modes]),
            np.concatenate([self.coeffs, other.coeffs]),
        )

    def __mul__(self, other: "AlmostPeriodicFunction") -> "AlmostPeriodicFunction":
        modes = (self.modes[:, None, :] + other.modes[None, :, :]).reshape(-1, self.modes.shape[1])
        coeffs = np.multiply.outer(self.coeffs, other.coeffs).reshape(-1)
        return AlmostPeriodicFunction(self.frequency, modes, coeffs)

    def scale(self, factor: float) -> "AlmostPeriodicFunction":
        return AlmostPeriodicFunction(self.frequency, self.modes, factor * self.coeffs)

    def rescaled_time(self, factor: float) -> "AlmostPeriodicFunction":
        """p(factor * t), i.e. the same coefficients over frequency factor * omega."""
        return AlmostPeriodicFunction(self.frequency.scaled(factor), self.modes, self.coeffs)

    def to_dict(self) -> Dict:
        return {
            "terms": [
                {"k": m, "re": c.real, "im": c.imag}
                for m, c in zip(self.modes.tolist(), self.coeffs.tolist())
            ]
        }

    @classmethod
    def from_dict(cls, frequency: Frequency, data: Mapping) -> "AlmostPeriodicFunction":
        """Accepts {"terms":[{"k":[..],"re":..,"im":..}]} or {"cosines":[[k, amp], ...]}."""
        if "cosines" in data:
            return cls.from_cosines(frequency, [(k, float(a)) for k, a in data["cosines"]])
        terms = data.get("terms", [])
        if not terms:
            return cls.zero(frequency)
        modes = np.array([t["k"] for t in terms], dtype=np.int64)
        coeffs = np.array([complex(t.get("re", 0.0), t.get("im", 0.0)) for t in terms])
        return cls(frequency, modes, coeffs)
