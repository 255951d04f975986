# src/approx.py
"""
Approximation functions and the quantities derived from them.

An approximation function Delta gauges admissible small-divisor deterioration.
This module evaluates Gamma0(mu) = sup Delta(t) e^{-mu t},
Gamma1(rho) = sup (1+t) Delta(t) e^{-rho t}, the infinite product
Psi0(mu) Psi1(rho) over the iteration schedule, and the schedule sequences
kappa_nu, mu_nu, rho_nu. All work happens on log Delta to avoid overflow.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from constants import (
    DECAY_GEOMETRIC,
    DECAY_INVERSE_SQUARE,
    DECAY_KINDS,
    DEFAULT_DECAY_Q,
    DEFAULT_KAPPA,
    DEFAULT_TAIL_TOL,
    DELTA_KIND_DEFAULT,
    DELTA_KIND_POWER_EXP,
    DELTA_KIND_TABLE,
    DELTA_KINDS,
    PSI_DIVERGENCE_RUN,
    PSI_MAX_TERMS,
    SUP_GRID_POINTS,
    SUP_REL_TOL,
    SUP_T_CAP,
    SUP_T_START,
    SUP_TAIL_DROP,
)
from errors import ConfigValidationError, Divergence, NoConvergence, PropertyViolation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ApproxFunction:
    """
    An approximation function Delta with Delta(0) = 1.

    Kinds:
            default   : log Delta(t) = t / (1 + log(1+t))**2
            power-exp : log Delta(t) = t**sigma
            table     : log Delta interpolated linearly between knots (t, Delta)
    """

    kind: str = DELTA_KIND_DEFAULT
    sigma: float = 0.5
    knots: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.kind not in DELTA_KINDS:
            raise ConfigValidationError(
                f"Invalid delta kind: {self.kind}. Must be one of {DELTA_KINDS}"
            )
        if self.kind == DELTA_KIND_POWER_EXP and not 0.0 < self.sigma < 1.0:
            raise ConfigValidationError(f"sigma must lie in (0, 1), got {self.sigma}")
        if self.kind == DELTA_KIND_TABLE:
            if not self.knots:
                raise ConfigValidationError("table delta needs at least one knot")
            ts = [t for t, _ in self.knots]
            if ts != sorted(ts) or ts[0] != 0.0:
                raise ConfigValidationError("table knots must start at t=0 and increase")
            if any(v <= 0 for _, v in self.knots):
                raise ConfigValidationError("table values must be positive")

    def log_delta(self, t):
        """log Delta(t), vectorized over numpy arrays."""
        t = np.asarray(t, dtype=float)
        if self.kind == DELTA_KIND_DEFAULT:
            return t / (1.0 + np.log1p(t)) ** 2
        if self.kind == DELTA_KIND_POWER_EXP:
            return np.power(t, self.sigma)
        ts = np.array([k[0] for k in self.knots])
        logs = np.log([k[1] for k in self.knots])
        if len(ts) == 1:
            return np.full_like(t, logs[0])
        return np.interp(t, ts, logs)

    def __call__(self, t):
        return np.exp(self.log_delta(t))

    @classmethod
    def constant(cls) -> "ApproxFunction":
        """Delta identically 1."""
        return cls(kind=DELTA_KIND_TABLE, knots=((0.0, 1.0),))

    @classmethod
    def from_dict(cls, data: Mapping) -> "ApproxFunction":
        kind = data.get("kind", DELTA_KIND_DEFAULT)
        knots = tuple((float(t), float(v)) for t, v in data.get("knots", ()))
        return cls(kind=kind, sigma=float(data.get("sigma", 0.5)), knots=knots)

    def to_dict(self) -> Dict:
        data = {"kind": self.kind}
        if self.kind == DELTA_KIND_POWER_EXP:
            data["sigma"] = self.sigma
        if self.kind == DELTA_KIND_TABLE:
            data["knots"] = [list(k) for k in self.knots]
        return data


def default_delta() -> ApproxFunction:
    """Return Delta(t) = exp(t / (1 + log(1+t))**2)."""
    return ApproxFunction(kind=DELTA_KIND_DEFAULT)


def _log_supremum(g: Callable[[np.ndarray], np.ndarray]) -> float:
    """
    Maximize g over t >= 0 by logarithmic grid scan plus bounded refinement.

    The scan window grows until the values at its right end fall far below
    the running maximum.

    Raises:
            NoConvergence: If the maximizer is still at the window edge at the cap
    """
    t_hi = SUP_T_START
    while True:
        grid = np.concatenate(([0.0], np.geomspace(1e-6, t_hi, SUP_GRID_POINTS - 1)))
        values = g(grid)
        i = int(np.argmax(values))
        if i < len(grid) - 1 and values[-1] < values[i] - SUP_TAIL_DROP:
            break
        if t_hi >= SUP_T_CAP:
            raise NoConvergence(
                f"supremum not bracketed below t_max={SUP_T_CAP:g}", t_max=SUP_T_CAP
            )
        t_hi *= 8.0

    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    best = float(values[i])
    if hi > lo:
        result = optimize.minimize_scalar(
            lambda t: -float(g(np.array(t))),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": SUP_REL_TOL * max(1.0, hi)},
        )
        best = max(best, -float(result.fun))
    return best


@lru_cache(maxsize=4096)
def log_gamma0(delta: ApproxFunction, mu: float) -> float:
    """log Gamma0(mu) = sup_t (log Delta(t) - mu t)."""
    if mu <= 0:
        raise ConfigValidationError(f"mu must be positive, got {mu}")
    return _log_supremum(lambda t: delta.log_delta(t) - mu * t)


@lru_cache(maxsize=4096)
def log_gamma1(delta: ApproxFunction, rho: float) -> float:
    """log Gamma1(rho) = sup_t (log(1+t) + log Delta(t) - rho t)."""
    if rho <= 0:
        raise ConfigValidationError(f"rho must be positive, got {rho}")
    return _log_supremum(lambda t: np.log1p(t) + delta.log_delta(t) - rho * t)


def gamma0(delta: ApproxFunction, mu: float) -> float:
    """
    Gamma0(mu) = sup over t >= 0 of Delta(t) e^{-mu t}.

    Args:
            delta: Approximation function
            mu: Positive decay rate

    Returns:
            The supremum (at least 1)

    Raises:
            NoConvergence: If the maximizer cannot be bracketed
    """
    return math.exp(log_gamma0(delta, float(mu)))


def gamma1(delta: ApproxFunction, rho: float) -> float:
    """Gamma1(rho) = sup over t >= 0 of (1+t) Delta(t) e^{-rho t}."""
    return math.exp(log_gamma1(delta, float(rho)))


def gamma_ratio_diagnostic(delta: ApproxFunction, rho: float) -> Tuple[float, float, bool]:
    """
    Compare Gamma0(rho) against rho * Gamma1(rho).

    The comparison is reported, not enforced: it holds for rho >= 1 with the
    default Delta but fails for small rho (Delta = 1, rho = 0.5 gives
    1 > 0.607).

    Returns:
            (Gamma0(rho), rho * Gamma1(rho), whether Gamma0 <= rho * Gamma1)
    """
    g0 = gamma0(delta, rho)
    rg1 = rho * gamma1(delta, rho)
    holds = g0 <= rg1 * (1.0 + SUP_REL_TOL)
    if not holds:
        logger.warning(
            "Gamma0(%g)=%.6g exceeds rho*Gamma1(rho)=%.6g for delta kind %s",
            rho,
            g0,
            rg1,
            delta.kind,
        )
    return g0, rg1, holds


@dataclass(frozen=True)
class SequenceSchedule:
    """
    Iteration sequences mu_nu, rho_nu and exponents kappa_nu.

    decay = "geometric":      mu_nu = mu (1-q) q**nu
    decay = "inverse-square": mu_nu = mu (6/pi**2) / (nu+1)**2
    Both sum to mu exactly; rho_nu likewise.
    """

    mu_total: float
    rho_total: float
    kappa: float = DEFAULT_KAPPA
    decay_q: float = DEFAULT_DECAY_Q
    tail_tol: float = DEFAULT_TAIL_TOL
    decay: str = DECAY_GEOMETRIC

    def __post_init__(self):
        if self.mu_total <= 0 or self.rho_total <= 0:
            raise ConfigValidationError("mu and rho totals must be positive")
        if self.kappa <= 1:
            raise ConfigValidationError(f"kappa must exceed 1, got {self.kappa}")
        if not 0.0 < self.decay_q < 1.0:
            raise ConfigValidationError(f"decay_q must lie in (0, 1), got {self.decay_q}")
        if self.decay not in DECAY_KINDS:
            raise ConfigValidationError(
                f"Invalid decay: {self.decay}. Must be one of {DECAY_KINDS}"
            )

    def _fraction(self, nu: int) -> float:
        if self.decay == DECAY_GEOMETRIC:
            return (1.0 - self.decay_q) * self.decay_q**nu
        return 6.0 / (math.pi**2 * (nu + 1) ** 2)

    def mu(self, nu: int) -> float:
        return self.mu_total * self._fraction(nu)

    def rho(self, nu: int) -> float:
        return self.rho_total * self._fraction(nu)

    def kappa_nu(self, nu: int) -> float:
        return kappa_sequence(self.kappa, nu)

    def mu_spent(self, j: int) -> float:
        """Sum of mu_nu for nu < j."""
        if self.decay == DECAY_GEOMETRIC:
            return self.mu_total * (1.0 - self.decay_q**j)
        return sum(self.mu(nu) for nu in range(j))

    def rho_spent(self, j: int) -> float:
        """Sum of rho_nu for nu < j."""
        if self.decay == DECAY_GEOMETRIC:
            return self.rho_total * (1.0 - self.decay_q**j)
        return sum(self.rho(nu) for nu in range(j))


def kappa_sequence(kappa: float, nu: int) -> float:
    """kappa_nu = (kappa - 1) / kappa**(nu+1); these sum to 1 over nu >= 0."""
    return (kappa - 1.0) / kappa ** (nu + 1)


def mu_sequence(schedule: SequenceSchedule, count: int) -> List[float]:
    return [schedule.mu(nu) for nu in range(count)]


def rho_sequence(schedule: SequenceSchedule, count: int) -> List[float]:
    return [schedule.rho(nu) for nu in range(count)]


@dataclass
class PsiResult:
    """Outcome of the Psi0 * Psi1 product evaluation"""

    log_psi0: float
    log_psi1: float
    terms: int
    tail_estimate: float

    @property
    def psi0(self) -> float:
        return math.exp(self.log_psi0)

    @property
    def psi1(self) -> float:
        return math.exp(self.log_psi1)

    @property
    def log_product(self) -> float:
        return self.log_psi0 + self.log_psi1

    @property
    def product(self) -> float:
        return math.exp(self.log_product)


def partial_psi(delta: ApproxFunction, schedule: SequenceSchedule, count: int) -> float:
    """log of the partial product over nu < count."""
    total = 0.0
    for nu in range(count):
        k = schedule.kappa_nu(nu)
        total += k * (log_gamma0(delta, schedule.mu(nu)) + log_gamma1(delta, schedule.rho(nu)))
    return total


def psi_factors(delta: ApproxFunction, schedule: SequenceSchedule) -> PsiResult:
    """
    Evaluate Psi0(mu) = prod Gamma0(mu_nu)**kappa_nu and Psi1(rho) likewise.

    The product is truncated once the tail estimate drops below tail_tol. The
    tail estimate is the larger of kappa**-(N+1) * log(Gamma0 Gamma1)(N) and a
    geometric extrapolation from the last term ratio.

    Raises:
            Divergence: If the per-term logs keep growing or the term budget runs out
    """
    log0 = 0.0
    log1 = 0.0
    previous = None
    growth_run = 0
    for nu in range(PSI_MAX_TERMS):
        k = schedule.kappa_nu(nu)
        l0 = log_gamma0(delta, schedule.mu(nu))
        l1 = log_gamma1(delta, schedule.rho(nu))
        log0 += k * l0
        log1 += k * l1
        term = k * (l0 + l1)

        if previous is not None and term > previous:
            growth_run += 1
            if growth_run >= PSI_DIVERGENCE_RUN:
                raise Divergence(
                    f"Psi product terms grew for {growth_run} consecutive steps "
                    f"(term {nu}: {term:.3e})",
                    terms=nu,
                )
        else:
            growth_run = 0

        tail = schedule.kappa ** -(nu + 1) * (l0 + l1)
        if previous is not None and previous > 0 and term < previous:
            ratio = term / previous
            tail = max(tail, term * ratio / (1.0 - ratio))
        if tail < schedule.tail_tol and growth_run == 0:
            logger.debug("psi product converged after %d terms (tail %.2e)", nu + 1, tail)
            return PsiResult(log0, log1, nu + 1, tail)
        previous = term
    raise Divergence(
        f"Psi product not converged within {PSI_MAX_TERMS} terms", terms=PSI_MAX_TERMS
    )


def psi_product(delta: ApproxFunction, schedule: SequenceSchedule) -> float:
    """Psi0(mu) * Psi1(rho) as a plain number."""
    return psi_factors(delta, schedule).product


@dataclass
class DeltaPropertyReport:
    """Outcome of the approximation-function property checks"""

    at_zero: bool
    nondecreasing: bool
    log_ratio_nonincreasing: bool
    integral_converges: bool
    block_ratios: List[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            self.at_zero
            and self.nondecreasing
            and self.log_ratio_nonincreasing
            and self.integral_converges
        )


def check_delta_properties(
    delta: ApproxFunction,
    t_max: float = 1.0e6,
    points: int = 10_000,
    t_mono: float = 1.0,
    integral_max: float = 1.0e8,
    strict: bool = False,
) -> DeltaPropertyReport:
    """
    Verify the defining conditions of an approximation function.

    Checks Delta(0) = 1, monotonicity on a log grid, monotone decrease of
    log Delta(t)/t beyond t_mono, and convergence of the integral of
    log Delta(t)/t**2 over [1, integral_max] by a ratio test on dyadic blocks.

    Raises:
            PropertyViolation: If strict and any check fails
    """
    grid = np.concatenate(([0.0], np.geomspace(1e-6, t_max, points - 1)))
    logs = delta.log_delta(grid)
    at_zero = abs(float(delta.log_delta(0.0))) < 1e-15
    nondecreasing = bool(np.all(np.diff(logs) >= -1e-12 * np.maximum(1.0, np.abs(logs[1:]))))

    tail = grid >= t_mono
    ratio = logs[tail] / grid[tail]
    log_ratio_nonincreasing = bool(
        np.all(np.diff(ratio) <= 1e-12 * np.maximum(1.0, np.abs(ratio[1:])))
    )

    blocks = []
    lo = 1.0
    while lo < integral_max:
        hi = min(2.0 * lo, integral_max)
        value, _ = integrate.quad(lambda t: float(delta.log_delta(t)) / t**2, lo, hi)
        blocks.append(value)
        lo = hi
    # the last block is partial unless integral_max is a power of two
    full = blocks if math.log2(integral_max).is_integer() else blocks[:-1]
    ratios = [b / a for a, b in zip(full[:-1], full[1:]) if a > 0]
    integral_converges = all(r < 1.0 for r in ratios) if ratios else True

    report = DeltaPropertyReport(
        at_zero=at_zero,
        nondecreasing=nondecreasing,
        log_ratio_nonincreasing=log_ratio_nonincreasing,
        integral_converges=integral_converges,
        block_ratios=ratios,
    )
    if strict and not report.passed:
        raise PropertyViolation(f"approximation function properties failed: {report}")
    return report
