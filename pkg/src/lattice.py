# src/lattice.py
"""
Finite-truncation model of the bilateral index lattice.

Provides the active index window, finitely supported integer vectors,
spatial structures with their weights, the product structure that adjoins
the internal angle block, distribution counts, and deterministic enumeration
of integer vectors inside an l1-ball.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from constants import (
    DEFAULT_ANGLE_OFFSET,
    DEFAULT_ENUMERATION_BUDGET,
    DEFAULT_RHO_W,
    ERROR_CAP_TOO_LARGE,
    ERROR_NO_COVERING_SET,
)
from errors import CapTooLarge, ConfigValidationError, NoCoveringSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IndexWindow:
    """Inclusive window [lo, hi] standing in for the full integer lattice"""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ConfigValidationError(
                f"Index window lo={self.lo} exceeds hi={self.hi}"
            )

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def indices(self) -> Tuple[int, ...]:
        return tuple(range(self.lo, self.hi + 1))

    def contains(self, index: int) -> bool:
        return self.lo <= index <= self.hi

    def position(self, index: int) -> int:
        """Column of index inside dense vectors over the window."""
        if not self.contains(index):
            raise ConfigValidationError(
                f"Index {index} outside window [{self.lo}, {self.hi}]"
            )
        return index - self.lo


@dataclass(frozen=True)
class IndexVector:
    """
    Finitely supported integer vector over the window.

    Entries are stored as sorted (index, value) pairs with nonzero values only.
    """

    entries: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        for _, value in self.entries:
            if value == 0:
                raise ConfigValidationError("IndexVector entries must be nonzero")

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, int]) -> "IndexVector":
        items = sorted((int(i), int(v)) for i, v in mapping.items() if int(v) != 0)
        return cls(tuple(items))

    @classmethod
    def from_dense(cls, window: IndexWindow, values: Sequence[int]) -> "IndexVector":
        return cls.from_mapping(
            {window.lo + pos: int(v) for pos, v in enumerate(values)}
        )

    @property
    def support(self) -> FrozenSet[int]:
        return frozenset(i for i, _ in self.entries)

    @property
    def norm(self) -> int:
        return sum(abs(v) for _, v in self.entries)

    def to_dense(self, window: IndexWindow) -> np.ndarray:
        dense = np.zeros(window.size, dtype=np.int64)
        for index, value in self.entries:
            dense[window.position(index)] = value
        return dense


def weight(subset: Iterable[int], rho_w: float) -> float:
    """
    Weight of a finite index set.

    Args:
            subset: Finite set of integer indices
            rho_w: Weight exponent (must exceed 2)

    Returns:
            1 + sum over the set of log(1+|i|)**rho_w
    """
    return 1.0 + sum(math.log1p(abs(i)) ** rho_w for i in subset)


@dataclass(frozen=True)
class SpatialStructure:
    """A finite family of index subsets covering the window"""

    window: IndexWindow
    subsets: Tuple[FrozenSet[int], ...]
    rho_w: float = DEFAULT_RHO_W

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """
        Validate exponent, membership and coverage.

        Raises:
                ConfigValidationError: If the structure is inconsistent
        """
        if self.rho_w <= 2:
            raise ConfigValidationError(f"rho_w must exceed 2, got {self.rho_w}")
        if not self.subsets:
            raise ConfigValidationError("Spatial structure needs at least one subset")
        covered = set()
        for subset in self.subsets:
            outside = [i for i in subset if not self.window.contains(i)]
            if outside:
                raise ConfigValidationError(
                    f"Subset {sorted(subset)} leaves window at {outside}"
                )
            covered |= subset
        missing = set(self.window.indices) - covered
        if missing:
            raise ConfigValidationError(
                f"Window indices {sorted(missing)} are covered by no subset"
            )

    @cached_property
    def weights(self) -> Tuple[float, ...]:
        return tuple(weight(subset, self.rho_w) for subset in self.subsets)

    @classmethod
    def from_dict(cls, data: Mapping) -> "SpatialStructure":
        """Build from {"window":[lo,hi],"subsets":[[...],...],"rho_w":3.0}."""
        try:
            lo, hi = data["window"]
            subsets = tuple(frozenset(int(i) for i in s) for s in data["subsets"])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigValidationError(f"Invalid spatial structure: {e}") from e
        return cls(
            window=IndexWindow(int(lo), int(hi)),
            subsets=subsets,
            rho_w=float(data.get("rho_w", DEFAULT_RHO_W)),
        )

    def to_dict(self) -> Dict:
        return {
            "window": [self.window.lo, self.window.hi],
            "subsets": [sorted(s) for s in self.subsets],
            "rho_w": self.rho_w,
        }


def support_weight(k, structure: SpatialStructure) -> float:
    """
    Minimum weight over the subsets covering the support of k.

    Args:
            k: IndexVector or any iterable of indices forming the support
            structure: Spatial structure to search

    Returns:
            min{[A] : supp k is a subset of A}

    Raises:
            NoCoveringSet: If no subset covers the support
    """
    support = k.support if isinstance(k, IndexVector) else frozenset(k)
    candidates = [
        w
        for subset, w in zip(structure.subsets, structure.weights)
        if support <= subset
    ]
    if not candidates:
        raise NoCoveringSet(ERROR_NO_COVERING_SET.format(support=sorted(support)))
    return min(candidates)


def distribution_count(structure: SpatialStructure, i: int, t: float) -> int:
    """Number of subsets with exactly i elements and weight at most t."""
    return sum(
        1
        for subset, w in zip(structure.subsets, structure.weights)
        if len(subset) == i and w <= t
    )


@dataclass(frozen=True)
class ProductStructure:
    """
    Product of a spatial structure with the internal angle block {1,...,n}.

    The angle index b is placed at window slot hi + angle_offset + b when
    weighing a product set, so [A x B] = weight(A united with the shifted B).
    """

    base: SpatialStructure
    n: int = 1
    angle_offset: int = DEFAULT_ANGLE_OFFSET

    def __post_init__(self):
        if self.n < 1:
            raise ConfigValidationError(f"Angle block size must be >= 1, got {self.n}")

    @property
    def window(self) -> IndexWindow:
        return self.base.window

    @property
    def dim(self) -> int:
        """Length of dense (k, k~) vectors: window columns then angle columns."""
        return self.window.size + self.n

    def angle_slot(self, b: int) -> int:
        return self.window.hi + self.angle_offset + b

    @cached_property
    def component_weights(self) -> Tuple[float, ...]:
        shifted = [self.angle_slot(b) for b in range(1, self.n + 1)]
        return tuple(
            weight(list(subset) + shifted, self.base.rho_w)
            for subset in self.base.subsets
        )

    def components(self) -> List[Tuple[FrozenSet[int], float]]:
        """List every product component as (spatial subset, weight)."""
        return list(zip(self.base.subsets, self.component_weights))

    @cached_property
    def _home_cache(self) -> Dict[FrozenSet[int], int]:
        return {}

    def home_component(self, support: Iterable[int]) -> int:
        """
        Index of the minimum-weight component covering a spatial support.

        Ties go to the first component in structure order.

        Raises:
                NoCoveringSet: If no component covers the support
        """
        key = frozenset(support)
        cache = self._home_cache
        if key not in cache:
            best = None
            for idx, (subset, w) in enumerate(self.components()):
                if key <= subset and (best is None or w < self.component_weights[best]):
                    best = idx
            if best is None:
                raise NoCoveringSet(ERROR_NO_COVERING_SET.format(support=sorted(key)))
            cache[key] = best
        return cache[key]

    def support_weight(self, k: Sequence[int]) -> float:
        """[[(k, k~)]] for a dense window vector k (angle part always covered)."""
        support = [self.window.lo + pos for pos, v in enumerate(k) if v != 0]
        return self.component_weights[self.home_component(support)]

    def component_positions(self, idx: int, with_angles: bool = True) -> List[int]:
        """Dense columns that may be nonzero inside component idx."""
        positions = sorted(self.window.position(i) for i in self.base.subsets[idx])
        if with_angles:
            positions += [self.window.size + b for b in range(self.n)]
        return positions

    def to_dict(self) -> Dict:
        data = self.base.to_dict()
        data.update({"n": self.n, "angle_offset": self.angle_offset})
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "ProductStructure":
        return cls(
            base=SpatialStructure.from_dict(data),
            n=int(data.get("n", 1)),
            angle_offset=int(data.get("angle_offset", DEFAULT_ANGLE_OFFSET)),
        )


def l1_ball_count(d: int, cap: int) -> int:
    """Number of integer points of l1-norm at most cap in Z^d."""
    return sum(
        2**j * math.comb(d, j) * math.comb(cap, j) for j in range(0, min(d, cap) + 1)
    )


def _l1_ball(d: int, cap: int) -> List[Tuple[int, ...]]:
    if d == 0:
        return [()]
    points = []
    for first in range(-cap, cap + 1):
        for rest in _l1_ball(d - 1, cap - abs(first)):
            points.append((first,) + rest)
    return points


def enumerate_indices(
    positions: Sequence[int],
    dim: int,
    order_cap: int,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> np.ndarray:
    """
    All integer vectors supported on the given columns with total order <= cap.

    Args:
            positions: Dense columns allowed to be nonzero
            dim: Length of the returned vectors
            order_cap: Maximum l1-norm
            budget: Largest admissible count

    Returns:
            Array of shape (M, dim) in lexicographic order of the free columns

    Raises:
            CapTooLarge: If the count would exceed the budget
    """
    if order_cap < 0:
        raise ConfigValidationError(f"order_cap must be >= 0, got {order_cap}")
    count = l1_ball_count(len(positions), order_cap)
    if count > budget:
        raise CapTooLarge(ERROR_CAP_TOO_LARGE.format(count=count, budget=budget))
    logger.debug("enumerating %d indices over %d columns", count, len(positions))
    free = np.array(_l1_ball(len(positions), order_cap), dtype=np.int64).reshape(
        count, len(positions)
    )
    out = np.zeros((count, dim), dtype=np.int64)
    if positions:
        out[:, list(positions)] = free
    return out
