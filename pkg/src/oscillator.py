# src/oscillator.py
"""
Superquadratic oscillators x'' + x^(2l+1) = sum_j p_j(t) x^j with almost
periodic coefficients.

Provides the generalized trigonometric functions C, S solving
C' = S, S' = -C^(2l+1) from (1, 0), their period, the action-angle chart
built on them, the rescaling to the slow system, assembly of the KAM
Hamiltonian around an action, and long-horizon simulation.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly
from scipy.optimize import brentq
from scipy.special import binom
from scipy.stats import linregress

from approx import ApproxFunction, SequenceSchedule
from apseries import (
    AlmostPeriodicFunction,
    Analyticity,
    Frequency,
    MonomialBasis,
    ParameterGrid,
    SeriesSpace,
    TorusSeries,
)
from constants import (
    DEFAULT_EPSILON,
    DEFAULT_RHO0,
    DEFAULT_Z_DEGREE,
    DRIFT_WINDOWS,
    HARMONIC_CAP,
    INTEGRATOR_DOP853,
    INTEGRATOR_VERLET,
    INTEGRATOR_YOSHIDA,
    INTEGRATORS,
    ODE_ATOL,
    ODE_RTOL,
    OSC_DEFAULT_M,
    OSC_DEFAULT_R,
    PERIOD_AGREEMENT_TOL,
    SIM_CHUNK,
    SPECTRAL_THRESHOLD,
    TABLE_CHECK_POINTS,
    TRIG_PROPERTY_TOL,
    TRIG_SAMPLES,
)
from errors import (
    ConfigValidationError,
    DegenerateJacobian,
    OriginExcluded,
    PropertyViolation,
    QuadratureStall,
    StepRejected,
)
from kam.base import Hamiltonian, NormalForm
from kam.schedule import KamSchedule
from lattice import IndexWindow, ProductStructure, SpatialStructure
from quadrature import integrate_unit

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def _check_l(l: int) -> None:
    if int(l) != l or l < 0:
        raise ConfigValidationError(f"l must be a nonnegative integer, got {l}")


def _trig_rhs(l: int):
    power = 2 * l + 1

    def rhs(_t, y):
        return [y[1], -(y[0] ** power)]

    return rhs


# =============================================================================
# Period and generalized trigonometric functions
# =============================================================================


@lru_cache(maxsize=None)
def period(l: int) -> float:
    """
    Minimal period T_* of (C, S).

    T_* = 4 sqrt(l+1) int_0^1 (1 - u^(2l+2))^(-1/2) du, cross-checked against
    four times the first zero of C from an ODE integration.

    Raises:
            QuadratureStall: If the two values disagree beyond PERIOD_AGREEMENT_TOL
    """
    _check_l(l)
    p = 2 * l + 2

    def integrand(u, one_minus_u):
        # 1 - u^p without cancellation near u = 1
        gap = -np.expm1(p * np.log1p(-one_minus_u))
        return 1.0 / np.sqrt(gap)

    quad_value = 4.0 * math.sqrt(l + 1) * integrate_unit(integrand)

    def crossing(_t, y):
        return y[0]

    crossing.terminal = True
    crossing.direction = -1
    sol = solve_ivp(
        _trig_rhs(l),
        (0.0, quad_value),
        [1.0, 0.0],
        method="DOP853",
        events=crossing,
        rtol=ODE_RTOL,
        atol=ODE_ATOL,
    )
    if not sol.t_events[0].size:
        raise QuadratureStall(f"No zero of C found for l={l}", l=l)
    ode_value = 4.0 * float(sol.t_events[0][0])
    if abs(ode_value - quad_value) > PERIOD_AGREEMENT_TOL * quad_value:
        raise QuadratureStall(
            f"Period quadrature {quad_value:.12g} and ODE {ode_value:.12g} disagree for l={l}",
            quadrature=quad_value,
            ode=ode_value,
        )
    logger.debug("period(l=%d) = %.15g (ODE %.15g)", l, quad_value, ode_value)
    return quad_value


@dataclass
class GenTrig:
    """
    Tabulated C and S over one period with quintic Hermite interpolation.

    The derivatives C' = S, C'' = -C^(2l+1) and S' = -C^(2l+1),
    S'' = -(2l+1) C^(2l) S are exact at every knot.
    """

    l: int
    period: float
    times: np.ndarray
    c: np.ndarray
    s: np.ndarray

    @cached_property
    def _c_poly(self) -> BPoly:
        p = 2 * self.l + 1
        derivs = np.stack([self.c, self.s, -(self.c**p)], axis=-1)
        return BPoly.from_derivatives(self.times, derivs)

    @cached_property
    def _s_poly(self) -> BPoly:
        p = 2 * self.l + 1
        d2 = -p * self.c ** (p - 1) * self.s if p > 1 else -self.s
        derivs = np.stack([self.s, -(self.c**p), d2], axis=-1)
        return BPoly.from_derivatives(self.times, derivs)

    def C(self, t):
        return self._c_poly(np.mod(t, self.period))

    def S(self, t):
        return self._s_poly(np.mod(t, self.period))

    def __call__(self, t) -> Tuple[np.ndarray, np.ndarray]:
        return self.C(t), self.S(t)

    def dC(self, t):
        return self._c_poly.derivative()(np.mod(t, self.period))

    def harmonics(
        self, power: int, cap: int = HARMONIC_CAP
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Fourier coefficients of C^power(T_* phi / 2 pi) in phi.

        Returns:
                (harmonic numbers, complex coefficients), thresholded at
                SPECTRAL_THRESHOLD relative to the largest coefficient
        """
        samples = self.c[:-1] ** power
        n = samples.shape[0]
        coeffs = np.fft.fft(samples) / n
        orders = np.rint(np.fft.fftfreq(n) * n).astype(np.int64)
        peak = float(np.max(np.abs(coeffs)))
        keep = (np.abs(orders) <= cap) & (np.abs(coeffs) > SPECTRAL_THRESHOLD * peak)
        order = np.argsort(orders[keep], kind="stable")
        return orders[keep][order], coeffs[keep][order]

    def rows(self, step: int = 1) -> List[Tuple[float, float, float]]:
        return [
            (float(t), float(c), float(s))
            for t, c, s in zip(self.times[::step], self.c[::step], self.s[::step])
        ]

    def check_properties(self, samples: int = 1000, seed: int = 0) -> Dict[str, float]:
        """
        Verify C(0)=1, S(0)=0, the energy identity (l+1)S^2 + C^(2l+2) = 1,
        parity, periodicity and C' = S.

        Returns:
                Worst deviation per property

        Raises:
                PropertyViolation: Naming the failed identity and its location
        """
        p = 2 * self.l + 2
        rng = np.random.Generator(np.random.Philox(seed))
        t = rng.uniform(0.0, self.period, samples)
        report = {}

        report["initial"] = max(abs(float(self.C(0.0)) - 1.0), abs(float(self.S(0.0))))
        if report["initial"] > TRIG_PROPERTY_TOL:
            raise PropertyViolation("Initial values C(0)=1, S(0)=0 fail", location=0.0)

        for name, where in (("energy_table", self.times), ("energy_random", t)):
            c, s = self.C(where), self.S(where)
            dev = np.abs((self.l + 1) * s**2 + c**p - 1.0)
            report[name] = float(dev.max())
            if report[name] > TRIG_PROPERTY_TOL:
                at = float(where[int(dev.argmax())])
                raise PropertyViolation(
                    f"Energy identity (l+1)S^2+C^(2l+2)=1 fails at t={at:.6g}", location=at
                )

        mirrored = self.period - self.times
        c_dev = np.abs(self.C(mirrored) - self.c)
        s_dev = np.abs(self.S(mirrored) + self.s)
        report["parity"] = float(max(c_dev.max(), s_dev.max()))
        if report["parity"] > TRIG_PROPERTY_TOL:
            at = float(self.times[int(np.argmax(np.maximum(c_dev, s_dev)))])
            raise PropertyViolation(f"Parity C even, S odd fails at t={at:.6g}", location=at)

        report["periodicity"] = float(max(abs(self.c[-1] - self.c[0]), abs(self.s[-1] - self.s[0])))
        if report["periodicity"] > TRIG_PROPERTY_TOL:
            raise PropertyViolation("T_*-periodicity fails at t=T_*", location=self.period)

        deriv = np.abs(self.dC(t) - self.S(t))
        report["derivative"] = float(deriv.max())
        if report["derivative"] > TRIG_PROPERTY_TOL:
            at = float(t[int(deriv.argmax())])
            raise PropertyViolation(f"C' = S fails at t={at:.6g}", location=at)
        return report


@lru_cache(maxsize=None)
def gen_trig(l: int, samples: int = TRIG_SAMPLES) -> GenTrig:
    """
    Build the table of C, S from the first quarter period.

    The quarter [0, T_*/4] is integrated with DOP853 and extended by
    C(T/2 - t) = -C(t), S(T/2 - t) = S(t) and C(t + T/2) = -C(t),
    S(t + T/2) = -S(t). The table is then compared with a direct
    integration over the full period.

    Raises:
            PropertyViolation: If a property of C, S fails
    """
    _check_l(l)
    if samples % 4:
        raise ConfigValidationError(f"sample count must be a multiple of 4, got {samples}")
    T = period(l)
    q = samples // 4
    times = T * np.arange(samples + 1) / samples
    sol = solve_ivp(
        _trig_rhs(l),
        (0.0, T / 4.0),
        [1.0, 0.0],
        method="DOP853",
        t_eval=times[: q + 1],
        rtol=ODE_RTOL,
        atol=ODE_ATOL,
    )
    if not sol.success:
        raise PropertyViolation(f"Quarter-period integration failed: {sol.message}")
    c = np.empty(samples + 1)
    s = np.empty(samples + 1)
    c[: q + 1], s[: q + 1] = sol.y[0], sol.y[1]
    c[q], s[q] = 0.0, -1.0 / math.sqrt(l + 1)
    i = np.arange(q + 1, 2 * q + 1)
    c[i], s[i] = -c[2 * q - i], s[2 * q - i]
    i = np.arange(2 * q + 1, samples + 1)
    c[i], s[i] = -c[i - 2 * q], -s[i - 2 * q]
    c[0], s[0] = 1.0, 0.0

    trig = GenTrig(l=l, period=T, times=times, c=c, s=s)
    trig.check_properties()

    rng = np.random.Generator(np.random.Philox(l))
    check_times = np.sort(rng.uniform(0.0, T, TABLE_CHECK_POINTS))
    direct = solve_ivp(
        _trig_rhs(l), (0.0, T), [1.0, 0.0], method="DOP853", t_eval=check_times, rtol=ODE_RTOL, atol=ODE_ATOL
    )
    table_error = float(
        max(np.max(np.abs(direct.y[0] - trig.C(check_times))), np.max(np.abs(direct.y[1] - trig.S(check_times))))
    )
    logger.debug("gen_trig(l=%d): table vs direct integration %.2e", l, table_error)
    if table_error > 10.0 * TRIG_PROPERTY_TOL:
        raise PropertyViolation(
            f"Table deviates from direct integration by {table_error:.3e}", error=table_error
        )
    return trig


# =============================================================================
# Action-angle chart
# =============================================================================


@dataclass
class ActionAngleChart:
    """
    Psi(rho, phi) = (lam C(tau), lam^(l+1) S(tau)) with lam = (c1 rho)^(1/(l+2))
    and tau = T_* phi / 2 pi, where c1 = 2 pi (l+2) / T_*.

    In the order (phi, rho) the chart has Jacobian determinant 1.
    """

    trig: GenTrig
    action_window: Tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        lo, hi = self.action_window
        if lo < 0 or hi <= lo:
            raise ConfigValidationError(f"Invalid action window {self.action_window}")

    @classmethod
    def for_l(cls, l: int, action_window: Tuple[float, float] = (0.0, math.inf)) -> "ActionAngleChart":
        return cls(gen_trig(l), action_window)

    @property
    def l(self) -> int:
        return self.trig.l

    @property
    def period(self) -> float:
        return self.trig.period

    @property
    def c1(self) -> float:
        return TWO_PI * (self.l + 2) / self.period

    def _lam(self, rho):
        rho = np.asarray(rho, dtype=float)
        if np.any(rho <= 0):
            raise OriginExcluded("The action must be positive")
        return (self.c1 * rho) ** (1.0 / (self.l + 2))

    def forward(self, rho, phi) -> Tuple[np.ndarray, np.ndarray]:
        lam = self._lam(rho)
        tau = self.period * np.asarray(phi, dtype=float) / TWO_PI
        c, s = self.trig(tau)
        return lam * c, lam ** (self.l + 1) * s

    @cached_property
    def _angle_table(self) -> np.ndarray:
        alpha = np.mod(np.arctan2(-self.trig.s, self.trig.c), TWO_PI)
        alpha[0] = 0.0
        alpha[-1] = TWO_PI
        return alpha

    def _polar_angle(self, tau: float) -> float:
        c, s = self.trig(tau)
        return math.atan2(-float(s), float(c))

    def inverse(self, u: float, v: float) -> Tuple[float, float]:
        """
        (rho, phi) with Psi(rho, phi) = (u, v).

        The level lam^(2l+2) = (l+1) v^2 + u^(2l+2) gives rho; the angle is
        the time of flight tau along the unit level set, found by root
        finding on the polar angle, which increases strictly along it.

        Raises:
                OriginExcluded: At (u, v) = (0, 0)
        """
        l = self.l
        level = (l + 1) * v * v + u ** (2 * l + 2)
        if level <= 0.0:
            raise OriginExcluded("The origin has no action-angle coordinates")
        lam = level ** (1.0 / (2 * l + 2))
        rho = lam ** (l + 2) / self.c1
        c_target, s_target = u / lam, v / lam ** (l + 1)
        target = math.atan2(-s_target, c_target) % TWO_PI

        table = self._angle_table
        times = self.trig.times
        i = int(np.clip(np.searchsorted(table, target, side="right") - 1, 0, len(times) - 2))

        def gap(tau):
            return (self._polar_angle(tau) - target + math.pi) % TWO_PI - math.pi

        a, b = float(times[i]), float(times[i + 1])
        ga, gb = gap(a), gap(b)
        if ga == 0.0:
            tau = a
        elif gb == 0.0:
            tau = b
        elif ga * gb > 0:
            tau = a if abs(ga) < abs(gb) else b
        else:
            tau = brentq(gap, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        phi = (TWO_PI * tau / self.period) % TWO_PI
        return rho, phi

    def jacobian(self, rho: float, phi: float, step: float = 1.0e-6) -> np.ndarray:
        """Central-difference d(u, v)/d(phi, rho)."""
        jac = np.zeros((2, 2))
        for col, (dphi, drho) in enumerate(((step, 0.0), (0.0, step * max(1.0, rho)))):
            up = np.array(self.forward(rho + drho, phi + dphi), dtype=float)
            down = np.array(self.forward(rho - drho, phi - dphi), dtype=float)
            jac[:, col] = (up - down) / (2.0 * (dphi + drho))
        return jac

    def energy(self, rho):
        """h(rho) = c1^((2l+2)/(l+2)) rho^((2l+2)/(l+2)) / (2l+2)."""
        q = (2 * self.l + 2) / (self.l + 2)
        return (self.c1 * np.asarray(rho, dtype=float)) ** q / (2 * self.l + 2)

    def frequency_of_action(self, rho):
        """w~(rho) = c1^((2l+2)/(l+2)) rho^(l/(l+2)) / (l+2)."""
        l = self.l
        return self.c1 ** ((2 * l + 2) / (l + 2)) * np.asarray(rho, dtype=float) ** (l / (l + 2)) / (l + 2)

    def action_of_frequency(self, omega_tilde):
        """
        Closed-form inverse of frequency_of_action.

        Raises:
                DegenerateJacobian: For l = 0, where the frequency is constant
        """
        l = self.l
        if l == 0:
            raise DegenerateJacobian("The harmonic oscillator has an action-independent frequency")
        base = (l + 2) * np.asarray(omega_tilde, dtype=float) / self.c1 ** ((2 * l + 2) / (l + 2))
        return base ** ((l + 2) / l)

    def nondegeneracy(self, rho):
        """d w~ / d rho = l c1^((2l+2)/(l+2)) rho^(-2/(l+2)) / (l+2)^2."""
        l = self.l
        return l * self.c1 ** ((2 * l + 2) / (l + 2)) * np.asarray(rho, dtype=float) ** (-2.0 / (l + 2)) / (l + 2) ** 2


def h0(x, v, l: int):
    """Unforced energy v^2/2 + x^(2l+2)/(2l+2)."""
    return 0.5 * np.square(v) + np.power(x, 2 * l + 2) / (2 * l + 2)


# =============================================================================
# Forcing and rescaling
# =============================================================================


def _is_real(p: AlmostPeriodicFunction, tol: float = 1e-12) -> bool:
    lookup = {tuple(m): c for m, c in zip(p.modes.tolist(), p.coeffs)}
    scale = max(1.0, float(np.max(np.abs(p.coeffs), initial=0.0)))
    for mode, c in lookup.items():
        partner = lookup.get(tuple(-x for x in mode), 0.0)
        if abs(c - np.conj(partner)) > tol * scale:
            return False
    return True


@dataclass
class ForcingSpec:
    """Coefficients p_j (j = 0..2l) of x'' + x^(2l+1) = sum_j p_j(t) x^j"""

    l: int
    frequency: Frequency
    coefficients: Dict[int, AlmostPeriodicFunction] = field(default_factory=dict)
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        _check_l(self.l)
        if not self.epsilon > 0:
            raise ConfigValidationError(f"epsilon must be positive, got {self.epsilon}")
        for j, p in self.coefficients.items():
            if not 0 <= j <= 2 * self.l:
                raise ConfigValidationError(f"Coefficient index j={j} outside 0..{2 * self.l}")
            if p.frequency.window != self.frequency.window:
                raise ConfigValidationError(f"p_{j} uses a different index window")
            if not _is_real(p):
                raise ConfigValidationError(f"p_{j} is not real-valued")

    @property
    def is_unforced(self) -> bool:
        return all(p.size == 0 for p in self.coefficients.values())

    def p(self, j: int) -> AlmostPeriodicFunction:
        return self.coefficients.get(j, AlmostPeriodicFunction.zero(self.frequency))

    def coefficient_values(self, t: np.ndarray) -> np.ndarray:
        """p_j(t) for j = 0..2l at every time, shape (..., 2l+1)."""
        t = np.asarray(t, dtype=float)
        return np.stack([self.p(j)(t) for j in range(2 * self.l + 1)], axis=-1)

    def force(self, x: float, t: float) -> float:
        total = -(x ** (2 * self.l + 1))
        for j, p in self.coefficients.items():
            total += float(p(t)) * x**j
        return total

    @classmethod
    def from_dict(cls, data: Mapping) -> "ForcingSpec":
        """
        Build from {"l": 1, "epsilon": 1e-6, "window": [0, 1], "omega": [...],
        "coefficients": {"2": {"cosines": [[[1, 0], 0.5]]}}}.
        """
        try:
            frequency = Frequency.from_dict(data)
            coefficients = {
                int(j): AlmostPeriodicFunction.from_dict(frequency, spec)
                for j, spec in data.get("coefficients", {}).items()
            }
            return cls(
                l=int(data.get("l", 1)),
                frequency=frequency,
                coefficients=coefficients,
                epsilon=float(data.get("epsilon", DEFAULT_EPSILON)),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ConfigValidationError):
                raise
            raise ConfigValidationError(f"Invalid forcing spec: {e}") from e

    def to_dict(self) -> Dict:
        data = self.frequency.to_dict()
        data.update(
            {
                "l": self.l,
                "epsilon": self.epsilon,
                "coefficients": {str(j): p.to_dict() for j, p in sorted(self.coefficients.items())},
            }
        )
        return data


@dataclass
class RescaledSystem:
    """
    The slow system u'' + u^(2l+1) = sum_j eps^(2l+1-j) p_j(eps^l tau) u^j
    obtained from u = eps x, tau = eps^-l t.
    """

    original: ForcingSpec
    spec: ForcingSpec

    @property
    def epsilon(self) -> float:
        return self.original.epsilon

    @property
    def omega_hat(self) -> Frequency:
        return self.spec.frequency

    def coefficient_scale(self, j: int) -> float:
        return self.epsilon ** (2 * self.original.l + 1 - j)

    def to_slow_state(self, t: float, x: float, v: float) -> Tuple[float, float, float]:
        eps, l = self.epsilon, self.original.l
        return t / eps**l, eps * x, eps ** (l + 1) * v

    def to_original_state(self, tau: float, u: float, w: float) -> Tuple[float, float, float]:
        eps, l = self.epsilon, self.original.l
        return eps**l * tau, u / eps, w / eps ** (l + 1)


def rescale(spec: ForcingSpec) -> RescaledSystem:
    """Slow system of spec at its epsilon, with forcing frequency eps^l omega."""
    eps, l = spec.epsilon, spec.l
    factor = eps**l
    coefficients = {
        j: AlmostPeriodicFunction(spec.frequency.scaled(factor), p.modes, p.coeffs * eps ** (2 * l + 1 - j))
        for j, p in spec.coefficients.items()
    }
    slow = ForcingSpec(l=l, frequency=spec.frequency.scaled(factor), coefficients=coefficients, epsilon=1.0)
    return RescaledSystem(original=spec, spec=slow)


# =============================================================================
# KAM Hamiltonian around an action
# =============================================================================


def default_structure(window: IndexWindow) -> ProductStructure:
    """Singletons of the window plus the full window, with one internal angle."""
    subsets = [frozenset([i]) for i in window.indices]
    if window.size > 1:
        subsets.append(frozenset(window.indices))
    return ProductStructure(SpatialStructure(window, tuple(subsets)), n=1)


def _taylor_block(q: float, rho0: np.ndarray, basis: MonomialBasis, start: int = 0) -> np.ndarray:
    """Coefficients of (rho0 + z)^q in z up to the basis degree, shape (P, Q)."""
    block = np.zeros((rho0.shape[0], basis.size), dtype=complex)
    for k in range(start, basis.degree + 1):
        block[:, basis.index[(k,)]] = binom(q, k) * rho0 ** (q - k)
    return block


@dataclass
class OscillatorHamiltonian:
    """KAM Hamiltonian of the slow system with its smallness diagnostics"""

    hamiltonian: Hamiltonian
    system: RescaledSystem
    rho0: np.ndarray
    s: float
    norm: float
    E0: Optional[float] = None

    @property
    def scaled_norm(self) -> float:
        """s^-1 |||P|||."""
        return self.norm / self.s

    @property
    def constant_estimate(self) -> float:
        """|||P||| / eps, the constant hidden in |||P||| < C eps."""
        return self.norm / self.system.epsilon

    @property
    def gate_passed(self) -> Optional[bool]:
        return None if self.E0 is None else self.scaled_norm <= self.E0

    def to_dict(self) -> Dict:
        return {
            "epsilon": self.system.epsilon,
            "rho0": self.rho0.tolist(),
            "omega_tilde": self.hamiltonian.normal.omega_tilde[:, 0].tolist(),
            "omega_hat": list(self.system.omega_hat.values),
            "s": self.s,
            "norm": self.norm,
            "scaled_norm": self.scaled_norm,
            "constant_estimate": self.constant_estimate,
            "E0": self.E0,
            "gate_passed": self.gate_passed,
            "modes": self.hamiltonian.perturbation.size,
        }


def build_hamiltonian(
    spec: ForcingSpec,
    chart: Optional[ActionAngleChart] = None,
    rho0: float = DEFAULT_RHO0,
    structure: Optional[ProductStructure] = None,
    m: float = OSC_DEFAULT_M,
    r: float = OSC_DEFAULT_R,
    degree: int = DEFAULT_Z_DEGREE,
    harmonic_cap: int = HARMONIC_CAP,
    grid: Optional[ParameterGrid] = None,
    delta: Optional[ApproxFunction] = None,
    sequences: Optional[SequenceSchedule] = None,
    enforce_gate: bool = True,
) -> OscillatorHamiltonian:
    """
    Assemble N + P for the slow system in action-angle variables around rho0.

        N = h(rho0) + <eps^l omega, J> + w~ z
        P = [h(rho0 + z) - h(rho0) - w~ z]
            - sum_j eps^(2l+1-j)/(j+1) p_j(theta) (c1 (rho0 + z))^((j+1)/(l+2)) C^(j+1)(T_* x / 2 pi)

    with s = eps^(1/2). The Taylor expansions in z stop at the basis degree and
    the harmonics of C^(j+1) at harmonic_cap.

    Args:
            spec: Forcing of the original equation
            chart: Action-angle chart (default: for spec.l)
            rho0: Action to expand around (ignored when grid is given)
            structure: Product structure over the forcing window (default: singletons + full window)
            m, r: Analyticity parameters of P
            degree: z-degree of the Taylor expansions
            harmonic_cap: Largest harmonic of C^(j+1) kept
            grid: Parameter grid of internal frequencies (default: the single node w~(rho0))
            delta, sequences: Approximation function and sequences for the smallness
                    gate; without delta the gate is not evaluated
            enforce_gate: Raise GateFailed when the gate fails

    Raises:
            GateFailed: If enforce_gate and s^-1 |||P||| > E0
            Divergence: If Psi diverges along the sequences
    """
    chart = chart or ActionAngleChart.for_l(spec.l)
    if chart.l != spec.l:
        raise ConfigValidationError(f"Chart for l={chart.l} does not match forcing l={spec.l}")
    l = spec.l
    eps = spec.epsilon
    system = rescale(spec)
    structure = structure or default_structure(spec.frequency.window)
    if structure.window != spec.frequency.window or structure.n != 1:
        raise ConfigValidationError("Structure must cover the forcing window with one internal angle")

    if grid is None:
        grid = ParameterGrid.single([float(chart.frequency_of_action(rho0))])
        actions = np.array([float(rho0)])
    else:
        actions = np.asarray(chart.action_of_frequency(grid.nodes[:, 0]), dtype=float)
    lo, hi = chart.action_window
    if np.any(actions <= lo) or np.any(actions > hi):
        raise ConfigValidationError(f"Actions {actions.tolist()} leave the window {chart.action_window}")

    basis = MonomialBasis(1, degree)
    space = SeriesSpace(structure, basis, grid)
    s = math.sqrt(eps)
    analyticity = Analyticity(m=m, r=r, s=s)

    q_h = (2 * l + 2) / (l + 2)
    amplitude = chart.c1**q_h / (2 * l + 2)
    terms = [(np.zeros(space.dim, dtype=np.int64), amplitude * _taylor_block(q_h, actions, basis, start=2))]

    for j, p in sorted(spec.coefficients.items()):
        if p.size == 0:
            continue
        q_j = (j + 1) / (l + 2)
        scale = -(eps ** (2 * l + 1 - j)) / (j + 1) * chart.c1**q_j
        taylor = _taylor_block(q_j, actions, basis)
        orders, harmonics = chart.trig.harmonics(j + 1, harmonic_cap)
        for k, c in zip(p.modes, p.coeffs):
            for kt, d in zip(orders, harmonics):
                mode = np.concatenate([k, [kt]]).astype(np.int64)
                terms.append((mode, scale * c * d * taylor))
    perturbation = TorusSeries.from_terms(space, terms, analyticity)
    normal = NormalForm(np.asarray(chart.energy(actions), dtype=float), system.omega_hat, grid)
    hamiltonian = Hamiltonian(normal, perturbation)
    norm = perturbation.norm_total()

    result = OscillatorHamiltonian(hamiltonian, system, actions, s, norm)
    if delta is not None:
        if sequences is None:
            raise ConfigValidationError("The smallness gate needs the schedule sequences along with delta")
        schedule = KamSchedule(delta, sequences, m=m, r=r, s=s)
        result.E0 = schedule.E0
        logger.info(
            "oscillator Hamiltonian: eps=%.3e, s^-1|||P|||=%.3e, E0=%.3e", eps, result.scaled_norm, schedule.E0
        )
        if enforce_gate:
            schedule.gate(norm)
    return result


# =============================================================================
# Simulation
# =============================================================================

_YOSHIDA_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_YOSHIDA_W0 = -(2.0 ** (1.0 / 3.0)) / (2.0 - 2.0 ** (1.0 / 3.0))


def _substeps(integrator: str) -> List[float]:
    if integrator == INTEGRATOR_VERLET:
        return [1.0]
    return [_YOSHIDA_W1, _YOSHIDA_W0, _YOSHIDA_W1]


@dataclass
class SimulationResult:
    """Recorded trajectory and diagnostics of one simulation"""

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    energy: np.ndarray
    sup_so_far: np.ndarray
    section: List[Tuple[int, float, float, float]]
    drift_slope: float
    metadata: Dict = field(default_factory=dict)

    @property
    def sup(self) -> float:
        return float(self.sup_so_far[-1]) if self.sup_so_far.size else 0.0

    @property
    def energy_drift(self) -> float:
        """max |h0(t) - h0(0)| / h0(0)."""
        ref = float(self.energy[0])
        if ref == 0.0:
            return float(np.max(np.abs(self.energy)))
        return float(np.max(np.abs(self.energy - ref)) / abs(ref))

    def trajectory_rows(self) -> List[Tuple[float, ...]]:
        return list(
            zip(
                self.times.tolist(),
                self.x.tolist(),
                self.v.tolist(),
                self.energy.tolist(),
                self.sup_so_far.tolist(),
            )
        )

    def section_rows(self) -> List[Tuple]:
        return list(self.section)


def _drift_slope(times: np.ndarray, x: np.ndarray) -> float:
    """Slope of a linear fit to the amplitude max|x| over consecutive windows."""
    windows = min(DRIFT_WINDOWS, times.shape[0] // 10)
    if windows < 3:
        return 0.0
    t_parts = np.array_split(times, windows)
    x_parts = np.array_split(np.abs(x), windows)
    centers = np.array([part.mean() for part in t_parts])
    amplitude = np.array([part.max() for part in x_parts])
    return float(linregress(centers, amplitude).slope)


def _section_frequency(spec: ForcingSpec) -> float:
    freqs = [abs(f) for p in spec.coefficients.values() for f in p.mode_frequencies() if f != 0]
    return min(freqs) if freqs else abs(float(spec.frequency.array[0])) or 1.0


def _simulate_splitting(spec, x0, v0, T, dt, integrator, record_every, section_times):
    l = spec.l
    power = 2 * l + 1
    steps = int(math.ceil(T / dt - 1e-9))
    fractions = _substeps(integrator)
    offsets = np.cumsum([0.0] + fractions)
    kick_offsets = np.array([[offsets[i], offsets[i + 1]] for i in range(len(fractions))]).reshape(-1)
    unforced = spec.is_unforced

    x, v, t = float(x0), float(v0), 0.0
    rec_t, rec_x, rec_v = [0.0], [x], [v]
    sup = abs(x)
    sups = [sup]
    section = []
    next_section = 0

    for start in range(0, steps, SIM_CHUNK):
        stop = min(steps, start + SIM_CHUNK)
        if unforced:
            table = None
        else:
            kick_times = (np.arange(start, stop)[:, None] + kick_offsets[None, :]) * dt
            table = spec.coefficient_values(kick_times).tolist()
        for n in range(start, stop):
            row = None if table is None else table[n - start]
            x_prev, v_prev, t_prev = x, v, t
            for stage, frac in enumerate(fractions):
                h = frac * dt
                a = -(x**power)
                if row is not None:
                    poly = 0.0
                    for c in reversed(row[2 * stage]):
                        poly = poly * x + c
                    a += poly
                v += 0.5 * h * a
                x += h * v
                a = -(x**power)
                if row is not None:
                    poly = 0.0
                    for c in reversed(row[2 * stage + 1]):
                        poly = poly * x + c
                    a += poly
                v += 0.5 * h * a
            t = (n + 1) * dt
            if not (math.isfinite(x) and math.isfinite(v)):
                raise StepRejected(f"Non-finite state at t={t:.6g}", step=n)
            sup = max(sup, abs(x))
            while next_section < len(section_times) and section_times[next_section] <= t:
                ts = section_times[next_section]
                w = (ts - t_prev) / dt
                section.append((next_section, ts, x_prev + w * (x - x_prev), v_prev + w * (v - v_prev)))
                next_section += 1
            if (n + 1) % record_every == 0 or n + 1 == steps:
                rec_t.append(t)
                rec_x.append(x)
                rec_v.append(v)
                sups.append(sup)
    return np.array(rec_t), np.array(rec_x), np.array(rec_v), np.array(sups), section


def _simulate_dop853(spec, x0, v0, T, dt, record_every, section_times):
    power = 2 * spec.l + 1

    def rhs(t, y):
        a = -(y[0] ** power)
        for j, p in spec.coefficients.items():
            a += float(p(t)) * y[0] ** j
        return [y[1], a]

    steps = int(math.ceil(T / dt - 1e-9))
    grid = np.arange(0, steps + 1, record_every) * dt
    if grid[-1] < steps * dt:
        grid = np.append(grid, steps * dt)
    sol = solve_ivp(
        rhs,
        (0.0, grid[-1]),
        [float(x0), float(v0)],
        method="DOP853",
        t_eval=grid,
        dense_output=bool(len(section_times)),
        rtol=ODE_RTOL,
        atol=ODE_ATOL,
    )
    if not sol.success:
        raise StepRejected(f"DOP853 integration failed: {sol.message}")
    x, v = sol.y
    sups = np.maximum.accumulate(np.abs(x))
    section = []
    if len(section_times):
        states = sol.sol(np.asarray(section_times))
        section = [(i, float(ts), float(states[0, i]), float(states[1, i])) for i, ts in enumerate(section_times)]
    return sol.t, x, v, sups, section


def simulate(
    spec: ForcingSpec,
    x0: float,
    v0: float,
    T: float,
    dt: float,
    integrator: str = INTEGRATOR_YOSHIDA,
    record_every: int = 1,
    section_phase: float = 0.0,
) -> SimulationResult:
    """
    Integrate x'' + x^(2l+1) = sum_j p_j(t) x^j from (x0, v0) up to T.

    The splitting integrators apply velocity-Verlet substeps (one for
    "verlet", the 4th-order symmetric composition for "yoshida4"); "dop853"
    is the adaptive 8th-order method. The stroboscopic section samples the
    state at t_n = (section_phase + 2 pi n) / w, w the slowest forcing
    frequency, by linear interpolation between steps (dense output for dop853).

    Raises:
            StepRejected: If the state becomes non-finite or the adaptive step fails
    """
    if dt <= 0 or T <= 0:
        raise ConfigValidationError(f"dt and T must be positive (dt={dt}, T={T})")
    if integrator not in INTEGRATORS:
        raise ConfigValidationError(f"Invalid integrator: {integrator}. Must be one of {INTEGRATORS}")
    if record_every < 1:
        raise ConfigValidationError(f"record_every must be >= 1, got {record_every}")

    w = _section_frequency(spec)
    first = section_phase / w
    count = int(max(0.0, (T - first) * w / TWO_PI)) + 1 if first <= T else 0
    section_times = [first + TWO_PI * n / w for n in range(count) if first + TWO_PI * n / w <= T]

    logger.info("simulate: l=%d, %s, T=%g, dt=%g", spec.l, integrator, T, dt)
    if integrator == INTEGRATOR_DOP853:
        times, x, v, sups, section = _simulate_dop853(spec, x0, v0, T, dt, record_every, section_times)
    else:
        times, x, v, sups, section = _simulate_splitting(
            spec, x0, v0, T, dt, integrator, record_every, section_times
        )
    energy = h0(x, v, spec.l)
    slope = _drift_slope(times, x)
    system = rescale(spec)
    metadata = {
        "l": spec.l,
        "epsilon": spec.epsilon,
        "integrator": integrator,
        "dt": dt,
        "T": T,
        "steps": int(math.ceil(T / dt - 1e-9)),
        "forcing_frequency": list(spec.frequency.values),
        "slow_forcing_frequency": list(system.omega_hat.values),
        "section_frequency": w,
    }
    return SimulationResult(times, x, v, energy, sups, section, slope, metadata)
