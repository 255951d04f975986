# src/resonance.py
"""
Small divisors, nonresonance certificates and resonant-set measure estimates.

A scan is exhaustive over every index whose weight [[(k, k~)]] and order
|k| + |k~| lie under explicit caps, so a certificate states its own scope.
The Monte-Carlo estimator draws parameter samples from one counter-based
stream and splits them across worker threads, which keeps the result
independent of the thread count.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from approx import ApproxFunction
from apseries import Frequency
from constants import DEFAULT_ENUMERATION_BUDGET, DEFAULT_SEED
from errors import ConfigValidationError, Violation
from lattice import IndexVector, ProductStructure, enumerate_indices, support_weight

logger = logging.getLogger(__name__)

SAMPLE_CHUNK = 4096


def divisor(k, k_tilde: Sequence[int], omega: Frequency, omega_tilde: Optional[Sequence[float]] = None) -> float:
    """
    Small divisor <k, omega> + <k~, omega~>.

    Args:
            k: IndexVector or dense integer vector over the window
            k_tilde: Integer vector over the internal angles
            omega: Frequency over the window
            omega_tilde: Internal frequency (may be omitted when k~ = 0)

    Returns:
            The divisor, summed with math.fsum
    """
    if isinstance(k, IndexVector):
        k = k.to_dense(omega.window)
    terms = [float(a) * b for a, b in zip(k, omega.values) if a]
    if omega_tilde is not None:
        terms += [float(a) * b for a, b in zip(k_tilde, omega_tilde) if a]
    elif any(k_tilde):
        raise ConfigValidationError("omega_tilde is required when k_tilde is nonzero")
    return math.fsum(terms)


@dataclass(frozen=True)
class FrequencyBox:
    """Axis-aligned box O of internal frequencies"""

    bounds: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        if not self.bounds:
            raise ConfigValidationError("FrequencyBox needs at least one dimension")
        for lo, hi in self.bounds:
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ConfigValidationError(f"Invalid box side [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    @property
    def sides(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, point: Sequence[float]) -> bool:
        point = np.asarray(point)
        return bool(np.all(point >= self.lower) and np.all(point <= self.upper))

    @classmethod
    def around(cls, center: Sequence[float], radius: float) -> "FrequencyBox":
        return cls(tuple((float(c) - radius, float(c) + radius) for c in center))

    @classmethod
    def from_dict(cls, data) -> "FrequencyBox":
        bounds = data["bounds"] if isinstance(data, Mapping) else data
        return cls(tuple((float(lo), float(hi)) for lo, hi in bounds))

    def to_dict(self) -> Dict:
        return {"bounds": [list(b) for b in self.bounds]}


@dataclass(frozen=True)
class NonresonanceCertificate:
    """Outcome of a passing scan, with the caps that bound its scope"""

    alpha: float
    delta: ApproxFunction
    weight_cap: float
    order_cap: int
    worst_mode: Optional[Tuple[int, ...]]
    worst_margin: float
    worst_divisor: float
    checked: int
    omega_tilde: Optional[Tuple[float, ...]] = None

    def covers(self, weight: float, order: int) -> bool:
        return weight <= self.weight_cap and order <= self.order_cap

    def to_dict(self) -> Dict:
        return {
            "alpha": self.alpha,
            "delta": self.delta.to_dict(),
            "weight_cap": self.weight_cap,
            "order_cap": self.order_cap,
            "worst_mode": list(self.worst_mode) if self.worst_mode is not None else None,
            "worst_margin": self.worst_margin,
            "worst_divisor": self.worst_divisor,
            "checked": self.checked,
            "omega_tilde": list(self.omega_tilde) if self.omega_tilde is not None else None,
        }


@dataclass
class IndexTable:
    """Deduplicated indices in enumeration order with their weights and orders"""

    modes: np.ndarray
    weights: np.ndarray
    orders: np.ndarray
    with_parameter: bool

    def __len__(self) -> int:
        return self.modes.shape[0]

    def log_deltas(self, delta: ApproxFunction) -> np.ndarray:
        """log Delta([[(k, k~)]]) + log Delta(|k| + |k~|)."""
        return delta.log_delta(self.weights) + delta.log_delta(self.orders.astype(float))

    def thresholds(self, alpha: float, delta: ApproxFunction) -> np.ndarray:
        if alpha <= 0:
            return np.zeros(len(self))
        return np.exp(math.log(alpha) - self.log_deltas(delta))

    def divisors(self, omega: Frequency, omega_tilde: Optional[Sequence[float]] = None) -> np.ndarray:
        lam = omega.window.size
        values = self.modes[:, :lam] @ omega.array
        if self.with_parameter:
            values = values + self.modes[:, lam:] @ np.asarray(omega_tilde, dtype=float)
        return values


def _support_weights(modes: np.ndarray, structure: ProductStructure, with_parameter: bool) -> np.ndarray:
    lam = structure.window.size
    if not modes.shape[0]:
        return np.zeros(0)
    masks = modes[:, :lam] != 0
    unique, inverse = np.unique(masks, axis=0, return_inverse=True)
    values = []
    for mask in unique:
        support = [structure.window.lo + p for p in np.nonzero(mask)[0]]
        if with_parameter:
            values.append(structure.component_weights[structure.home_component(support)])
        else:
            values.append(support_weight(support, structure.base))
    return np.asarray(values)[np.asarray(inverse).reshape(-1)]


def index_table(
    structure: ProductStructure,
    weight_cap: float,
    order_cap: int,
    with_parameter: bool,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> IndexTable:
    """
    Every index with weight <= weight_cap and order <= order_cap.

    Without a parameter the indices are spatial k != 0 (k~ absent); with a
    parameter they are (k, k~) with k~ != 0.
    """
    blocks = []
    if with_parameter:
        for idx, (_, w) in enumerate(structure.components()):
            if w <= weight_cap:
                positions = structure.component_positions(idx, with_angles=True)
                blocks.append(enumerate_indices(positions, structure.dim, order_cap, budget))
        dim = structure.dim
    else:
        for subset, w in zip(structure.base.subsets, structure.base.weights):
            if w <= weight_cap:
                positions = sorted(structure.window.position(i) for i in subset)
                blocks.append(enumerate_indices(positions, structure.window.size, order_cap, budget))
        dim = structure.window.size

    if not blocks:
        modes = np.zeros((0, dim), dtype=np.int64)
    else:
        stacked = np.concatenate(blocks)
        _, first = np.unique(stacked, axis=0, return_index=True)
        modes = stacked[np.sort(first)]
        if with_parameter:
            modes = modes[np.any(modes[:, structure.window.size :], axis=1)]
        else:
            modes = modes[np.any(modes, axis=1)]
    weights = _support_weights(modes, structure, with_parameter)
    logger.debug("index table: %d indices (parameter=%s)", modes.shape[0], with_parameter)
    return IndexTable(modes, weights, np.abs(modes).sum(axis=1), with_parameter)


def _chunked(count: int, parts: int) -> List[Tuple[int, int]]:
    parts = max(1, min(parts, count)) if count else 1
    edges = np.linspace(0, count, parts + 1).astype(int)
    return list(zip(edges[:-1], edges[1:]))


def scan(
    omega: Frequency,
    omega_tilde: Optional[Sequence[float]],
    structure: ProductStructure,
    delta: ApproxFunction,
    alpha: float,
    weight_cap: float,
    order_cap: int,
    threads: int = 1,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> NonresonanceCertificate:
    """
    Exhaustive nonresonance check within the caps.

    Checks |divisor| >= alpha / (Delta([[.]]) Delta(|.|)) for k != 0 when
    omega_tilde is None, and for k~ != 0 otherwise.

    Returns:
            NonresonanceCertificate with the minimum margin
            |divisor| Delta Delta / alpha - 1 and its first argmin

    Raises:
            Violation: With the offending index and both sides of the inequality
    """
    if alpha <= 0:
        raise ConfigValidationError(f"alpha must be positive, got {alpha}")
    with_parameter = omega_tilde is not None
    table = index_table(structure, weight_cap, order_cap, with_parameter, budget)
    if not len(table):
        return NonresonanceCertificate(
            alpha, delta, weight_cap, order_cap, None, math.inf, math.inf, 0,
            tuple(omega_tilde) if with_parameter else None,
        )

    thresholds = table.thresholds(alpha, delta)

    def margins(bounds: Tuple[int, int]) -> np.ndarray:
        lo, hi = bounds
        part = IndexTable(table.modes[lo:hi], table.weights[lo:hi], table.orders[lo:hi], with_parameter)
        return np.abs(part.divisors(omega, omega_tilde)) / thresholds[lo:hi] - 1.0

    chunks = _chunked(len(table), threads)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pieces = list(pool.map(margins, chunks))
    else:
        pieces = [margins(c) for c in chunks]
    margin = np.concatenate(pieces)

    worst = int(np.argmin(margin))
    mode = tuple(int(v) for v in table.modes[worst])
    lhs = abs(float(table.divisors(omega, omega_tilde)[worst]))
    rhs = float(thresholds[worst])
    if margin[worst] < 0:
        raise Violation(
            f"Nonresonance fails at {mode}: |divisor|={lhs:.6e} < {rhs:.6e}",
            key=mode,
            lhs=lhs,
            rhs=rhs,
        )
    logger.info("scan passed over %d indices, worst margin %.4g at %s", len(table), margin[worst], mode)
    return NonresonanceCertificate(
        alpha=alpha,
        delta=delta,
        weight_cap=weight_cap,
        order_cap=order_cap,
        worst_mode=mode,
        worst_margin=float(margin[worst]),
        worst_divisor=lhs,
        checked=len(table),
        omega_tilde=tuple(float(v) for v in omega_tilde) if with_parameter else None,
    )


@dataclass
class MeasureEstimate:
    """Monte-Carlo fraction of resonant parameters with its binomial interval"""

    alpha: float
    fraction: float
    ci_lo: float
    ci_hi: float
    union_bound: float
    seed: int
    samples: int
    hits: int

    def as_row(self) -> Tuple:
        return (self.alpha, self.fraction, self.ci_lo, self.ci_hi, self.union_bound, self.seed)


def union_bound(table: IndexTable, omega: Frequency, thresholds: np.ndarray, box: FrequencyBox) -> float:
    """
    Sum over slabs of their exact box-fraction bound 2 delta / side_j.

    delta = threshold / |k~_j| along the dominant coordinate j. Slabs whose
    hyperplane stays farther than the threshold from the box contribute 0.
    """
    lam = omega.window.size
    k_tilde = table.modes[:, lam:].astype(float)
    offsets = table.modes[:, :lam] @ omega.array
    lo = np.sum(np.minimum(k_tilde * box.lower, k_tilde * box.upper), axis=1)
    hi = np.sum(np.maximum(k_tilde * box.lower, k_tilde * box.upper), axis=1)
    meets = (-offsets > lo - thresholds) & (-offsets < hi + thresholds) & (thresholds > 0)
    j = np.argmax(np.abs(k_tilde), axis=1)
    widths = 2.0 * thresholds / np.abs(k_tilde[np.arange(len(j)), j])
    terms = np.minimum(1.0, widths / box.sides[j])
    return float(np.sum(terms[meets]))


def measure_estimate(
    omega: Frequency,
    structure: ProductStructure,
    delta: ApproxFunction,
    alpha: float,
    box: FrequencyBox,
    weight_cap: float,
    order_cap: int,
    n_samples: int,
    seed: int = DEFAULT_SEED,
    threads: int = 1,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> MeasureEstimate:
    """
    Estimate the fraction of the box violating the parameter nonresonance
    condition within the caps.

    Samples come from numpy's Philox generator seeded with seed; the sample
    array is drawn once and partitioned across threads.
    """
    if n_samples < 1000:
        raise ConfigValidationError(f"n_samples must be at least 1000, got {n_samples}")
    if alpha < 0:
        raise ConfigValidationError(f"alpha must be nonnegative, got {alpha}")
    if box.dim != structure.n:
        raise ConfigValidationError("Box dimension must equal the number of internal angles")
    if box.volume <= 0:
        raise ConfigValidationError("Box must have positive volume")

    table = index_table(structure, weight_cap, order_cap, True, budget)
    thresholds = table.thresholds(alpha, delta)
    lam = omega.window.size
    offsets = table.modes[:, :lam] @ omega.array
    k_tilde = table.modes[:, lam:].astype(float)

    rng = np.random.Generator(np.random.Philox(seed))
    samples = rng.uniform(box.lower, box.upper, size=(n_samples, box.dim))

    def count_hits(bounds: Tuple[int, int]) -> int:
        hits = 0
        for start in range(bounds[0], bounds[1], SAMPLE_CHUNK):
            stop = min(start + SAMPLE_CHUNK, bounds[1])
            values = samples[start:stop] @ k_tilde.T + offsets
            hits += int(np.count_nonzero(np.any(np.abs(values) < thresholds, axis=1)))
        return hits

    chunks = _chunked(n_samples, threads)
    if alpha == 0 or not len(table):
        hits = 0
    elif threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = sum(pool.map(count_hits, chunks))
    else:
        hits = sum(count_hits(c) for c in chunks)

    ci = stats.binomtest(hits, n_samples).proportion_ci(confidence_level=0.95)
    bound = union_bound(table, omega, thresholds, box) if len(table) else 0.0
    logger.info("measure alpha=%g: %d/%d resonant, union bound %.4g", alpha, hits, n_samples, bound)
    return MeasureEstimate(
        alpha=alpha,
        fraction=hits / n_samples,
        ci_lo=float(ci.low),
        ci_hi=float(ci.high),
        union_bound=bound,
        seed=seed,
        samples=n_samples,
        hits=hits,
    )


def extended_divisor_bound(
    structure: ProductStructure, delta: ApproxFunction, orders: Sequence[int]
) -> float:
    """
    Largest parameter radius h for which the extended divisor estimate holds:
    min over components of 1 / (Delta([A]) <A> Delta(<A>)).

    Args:
            orders: Truncation order <A> per component
    """
    h = math.inf
    for w, order in zip(structure.component_weights, orders):
        if order <= 0:
            continue
        value = math.exp(-float(delta.log_delta(w)) - float(delta.log_delta(float(order)))) / order
        h = min(h, value)
    return h


@dataclass
class ExtendedDivisorReport:
    """Re-scan of the halved inequality at sampled points of O_h"""

    passed: bool
    worst_margin: float
    worst_point: Optional[Tuple[float, ...]]
    checked_points: int
    checked_indices: int


def check_extended_divisors(
    omega: Frequency,
    center: Sequence[float],
    h: float,
    structure: ProductStructure,
    delta: ApproxFunction,
    alpha: float,
    mu: float,
    rho: float,
    truncation: float,
    weight_cap: float,
    order_cap: int,
    points: int = 100,
    seed: int = DEFAULT_SEED,
) -> ExtendedDivisorReport:
    """
    Sample points within h of center and re-check the inequality with
    constant alpha / 2 on indices with mu [[.]] + rho |.| <= truncation.

    The outcome is reported and logged, never raised.
    """
    table = index_table(structure, weight_cap, order_cap, True)
    keep = mu * table.weights + rho * table.orders <= truncation
    table = IndexTable(table.modes[keep], table.weights[keep], table.orders[keep], True)
    if not len(table):
        return ExtendedDivisorReport(True, math.inf, None, 0, 0)

    thresholds = table.thresholds(0.5 * alpha, delta)
    rng = np.random.Generator(np.random.Philox(seed))
    center = np.asarray(center, dtype=float)
    worst, worst_point = math.inf, None
    for _ in range(points):
        point = center + rng.uniform(-h, h, size=center.shape)
        margin = float(np.min(np.abs(table.divisors(omega, point)) / thresholds - 1.0))
        if margin < worst:
            worst, worst_point = margin, tuple(float(v) for v in point)
    passed = worst >= 0
    if not passed:
        logger.warning("extended divisor estimate fails at %s (margin %.3g)", worst_point, worst)
    return ExtendedDivisorReport(passed, worst, worst_point, points, len(table))
