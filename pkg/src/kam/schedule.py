# src/kam/schedule.py
"""
Parameter schedule of the iterative KAM scheme and the driver that runs it.

All sizes are carried as logarithms; E_j is far below the float range
after a few steps.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional

import numpy as np

from approx import ApproxFunction, PsiResult, SequenceSchedule, log_gamma0, log_gamma1, psi_factors
from apseries import ParameterGrid, TorusSeries
from constants import (
    ALPHA_NORMALIZED,
    DEFAULT_JMAX,
    IDENTITY_REL_TOL,
    KAM_A,
    KAM_B,
    KAM_C,
    KAM_D,
    KAM_E,
    LOG_RATIO_STEPS,
    MIN_LOG_RATIO,
    STOP_TOL,
)
from errors import ConfigValidationError, ErrorBoundExceeded, GateFailed
from kam.base import Hamiltonian, KamState, KamStepReport
from kam.step import kam_step

logger = logging.getLogger(__name__)

LOG2 = math.log(2.0)


@dataclass
class IdentityReport:
    """Schedule identities at one step, in log form"""

    j: int
    recursion_residual: float
    product_lhs: float
    product_rhs: float
    step_lhs: float
    step_rhs: float
    h_ratio: float

    @property
    def passed(self) -> bool:
        return (
            self.recursion_residual <= IDENTITY_REL_TOL
            and self.product_lhs <= self.product_rhs + IDENTITY_REL_TOL * abs(self.product_rhs)
            and self.step_lhs <= self.step_rhs + IDENTITY_REL_TOL * abs(self.step_rhs)
            and self.h_ratio <= -2.0 * LOG2 + IDENTITY_REL_TOL
        )


@dataclass
class KamSchedule:
    """
    The sequences m_j, r_j, s_j, h_j, E_j, K_j, eta_j of the iteration.

        Gamma_j = 2^(j+a) Gamma0(mu_j) Gamma1(rho_j)
        E_j     = (Theta_j E0)^(kappa^j),  Theta_j = prod_{nu<j} Gamma_nu^kappa_nu
        h_j     = 2^(j+c) E_j
        eta_j^2 = 4^-b Gamma_j E_j,  e^-K_j = 2^-d Gamma_j E_j
        s_{j+1} = eta_j s_j / 2
    """

    delta: ApproxFunction
    sequences: SequenceSchedule
    m: float
    r: float
    s: float
    w: float = 0.0
    h: Optional[float] = None
    a: int = KAM_A
    b: int = KAM_B
    c: int = KAM_C
    d: int = KAM_D
    e: int = KAM_E
    alpha_tilde: float = ALPHA_NORMALIZED

    def __post_init__(self):
        if self.s <= 0:
            raise ConfigValidationError(f"s must be positive, got {self.s}")
        if not 0 < self.sequences.mu_total <= self.m - self.w:
            raise ConfigValidationError(
                f"mu = {self.sequences.mu_total} must lie in (0, m - w = {self.m - self.w}]"
            )
        if not 0 < 2.0 * self.sequences.rho_total < self.r:
            raise ConfigValidationError(
                f"rho = {self.sequences.rho_total} must lie in (0, r/2 = {self.r / 2})"
            )
        if self.h is None:
            self.h = 2.0**self.c * self.E0

    @property
    def kappa(self) -> float:
        return self.sequences.kappa

    @cached_property
    def psi(self) -> PsiResult:
        return psi_factors(self.delta, self.sequences)

    @property
    def epsilon_star(self) -> float:
        return 2.0 ** (-self.e)

    @property
    def log_E0(self) -> float:
        return math.log(self.alpha_tilde * self.epsilon_star) - self.psi.log_product

    @property
    def E0(self) -> float:
        return math.exp(self.log_E0)

    def log_gamma_mu_rho(self, nu: int) -> float:
        return log_gamma0(self.delta, self.sequences.mu(nu)) + log_gamma1(
            self.delta, self.sequences.rho(nu)
        )

    def log_gamma(self, nu: int) -> float:
        return (nu + self.a) * LOG2 + self.log_gamma_mu_rho(nu)

    def log_theta(self, j: int) -> float:
        return sum(self.sequences.kappa_nu(nu) * self.log_gamma(nu) for nu in range(j))

    def log_E(self, j: int) -> float:
        return self.kappa**j * (self.log_theta(j) + self.log_E0)

    def log_gamma_E(self, j: int) -> float:
        return self.log_gamma(j) + self.log_E(j)

    def eta(self, j: int) -> float:
        return math.exp(0.5 * (self.log_gamma_E(j) - 2 * self.b * LOG2))

    def K(self, j: int) -> float:
        return self.d * LOG2 - self.log_gamma_E(j)

    def log_s(self, j: int) -> float:
        return math.log(self.s) + sum(math.log(self.eta(nu)) - LOG2 for nu in range(j))

    def log_h(self, j: int) -> float:
        if j == 0:
            return math.log(self.h)
        return (j + self.c) * LOG2 + self.log_E(j)

    def state(self, j: int) -> KamState:
        """Parameters of step j."""
        if j < 0:
            raise ConfigValidationError(f"step index must be nonnegative, got {j}")
        log_E = self.log_E(j)
        s_j = math.exp(self.log_s(j))
        return KamState(
            j=j,
            m=self.m - self.sequences.mu_spent(j),
            r=self.r - 2.0 * self.sequences.rho_spent(j),
            s=s_j,
            h=math.exp(self.log_h(j)),
            w=self.w,
            mu=self.sequences.mu(j),
            rho=self.sequences.rho(j),
            K=self.K(j),
            eta=self.eta(j),
            log_E=log_E,
            log_gamma=self.log_gamma(j),
            log_gamma_mu_rho=self.log_gamma_mu_rho(j),
            epsilon=s_j * math.exp(log_E),
        )

    def check_identities(self, j: int) -> IdentityReport:
        """
        Gamma_j^(kappa-1) E_j^kappa = E_{j+1}, the product bound
        Gamma_j E_j <= (2^(2+a) Psi E0)^(kappa^j), the per-step bound
        Gamma_j E_j <= 2^(3+a-e), and h_{j+1}/h_j <= 1/4.
        """
        lhs = (self.kappa - 1.0) * self.log_gamma(j) + self.kappa * self.log_E(j)
        rhs = self.log_E(j + 1)
        recursion = abs(lhs - rhs) / max(1.0, abs(rhs))
        product_rhs = self.kappa**j * ((2 + self.a) * LOG2 + self.psi.log_product + self.log_E0)
        h_ratio = LOG2 + self.log_E(j + 1) - self.log_E(j)
        return IdentityReport(
            j=j,
            recursion_residual=recursion,
            product_lhs=self.log_gamma_E(j),
            product_rhs=product_rhs,
            step_lhs=self.log_gamma_E(j),
            step_rhs=(3 + self.a - self.e) * LOG2,
            h_ratio=h_ratio,
        )

    def gate(self, perturbation_norm: float) -> None:
        """
        Check s^-1 |||P||| <= E0 <= h / 2^c.

        Raises:
                GateFailed: Naming the inequality that fails
        """
        lhs = perturbation_norm / self.s
        if lhs > self.E0:
            raise GateFailed(
                f"Smallness gate failed: s^-1|||P||| = {lhs:.6e} > E0 = {self.E0:.6e}",
                inequality="s^-1|||P||| <= E0",
                lhs=lhs,
                rhs=self.E0,
            )
        if self.E0 > self.h / 2.0**self.c * (1.0 + 1e-12):
            raise GateFailed(
                f"Smallness gate failed: E0 = {self.E0:.6e} > h/2^c = {self.h / 2.0 ** self.c:.6e}",
                inequality="E0 <= h/2^c",
                lhs=self.E0,
                rhs=self.h / 2.0**self.c,
            )

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "r": self.r,
            "s": self.s,
            "w": self.w,
            "h": self.h,
            "mu": self.sequences.mu_total,
            "rho": self.sequences.rho_total,
            "kappa": self.kappa,
            "constants": {"a": self.a, "b": self.b, "c": self.c, "d": self.d, "e": self.e},
            "log_psi0": self.psi.log_psi0,
            "log_psi1": self.psi.log_psi1,
            "E0": self.E0,
        }


def standalone_state(
    perturbation: TorusSeries,
    delta: ApproxFunction,
    mu: float,
    rho: float,
    h: Optional[float] = None,
    j: int = 0,
    a: int = KAM_A,
    b: int = KAM_B,
    c: int = KAM_C,
    d: int = KAM_D,
) -> KamState:
    """
    Step parameters for a single step on P: E = |||P|||/s and the derived
    eta and K; h defaults to 2^(j+c) E.
    """
    an = perturbation.analyticity
    if an is None:
        raise ConfigValidationError("standalone step needs a perturbation with analyticity parameters")
    epsilon = perturbation.norm_total()
    log_gm = log_gamma0(delta, mu) + log_gamma1(delta, rho)
    log_gamma = (j + a) * LOG2 + log_gm
    if epsilon == 0.0:
        log_E, eta, K = -math.inf, 0.0, math.inf
    else:
        log_E = math.log(epsilon / an.s)
        eta = math.exp(0.5 * (log_gamma + log_E - 2 * b * LOG2))
        K = d * LOG2 - log_gamma - log_E
    if h is None:
        h = an.h if an.h > 0 else (2.0 ** (j + c) * math.exp(log_E))
    return KamState(
        j=j,
        m=an.m,
        r=an.r,
        s=an.s,
        h=h,
        w=an.w,
        mu=mu,
        rho=rho,
        K=K,
        eta=eta,
        log_E=log_E,
        log_gamma=log_gamma,
        log_gamma_mu_rho=log_gm,
        epsilon=epsilon,
    )


@dataclass
class RunResult:
    """Outcome of an iterated KAM run"""

    hamiltonian: Hamiltonian
    reports: List[KamStepReport] = field(default_factory=list)
    identities: List[IdentityReport] = field(default_factory=list)
    states: List[KamState] = field(default_factory=list)
    stopped_early: bool = False

    @property
    def steps(self) -> int:
        return len(self.reports)


def log_norm_ratio(previous: float, current: float) -> float:
    """
    log|||P_{j+1}||| / log|||P_j|||.

    inf once the perturbation vanishes; nan while |||P_j||| >= 1, where
    the ratio says nothing about contraction.
    """
    if current <= 0.0:
        return math.inf
    if not 0.0 < previous < 1.0:
        return math.nan
    return math.log(current) / math.log(previous)


def _next_grid(hamiltonian: Hamiltonian, center: np.ndarray, half_width: float) -> ParameterGrid:
    grid = hamiltonian.normal.grid
    if grid.size == 1:
        return grid
    return ParameterGrid.around(center, half_width, grid.nodes_per_dim)


def run(
    hamiltonian: Hamiltonian,
    schedule: KamSchedule,
    j_max: int = DEFAULT_JMAX,
    stop_tol: float = STOP_TOL,
) -> RunResult:
    """
    Iterate kam_step under the schedule.

    Before step j, |||P_j|||_{m_j, r_j, s_j} <= s_j E_j is verified; after it
    the weighted displacement is compared with
    4 max(2^(1-a-j) Gamma_j E_j, 2 E_j / h_j). On the first LOG_RATIO_STEPS
    steps the contraction must be superlinear:
    log|||P_{j+1}||| / log|||P_j||| >= MIN_LOG_RATIO.

    Args:
            hamiltonian: H_0 = N_0 + P_0
            schedule: Parameter schedule
            j_max: Number of steps
            stop_tol: Stop once |||P_j||| <= stop_tol * s_j

    Raises:
            GateFailed: If the initial smallness gate fails
            ErrorBoundExceeded: If a step leaves its error bound
    """
    norm0 = hamiltonian.perturbation_norm(schedule.m, schedule.r, schedule.s)
    schedule.gate(norm0)
    logger.info(
        "run: |||P0||| = %.3e, E0 = %.3e, Psi = %.3e, j_max = %d",
        norm0,
        schedule.E0,
        schedule.psi.product,
        j_max,
    )
    center = np.asarray(hamiltonian.normal.grid.nodes.mean(axis=0))
    result = RunResult(hamiltonian)
    current = hamiltonian
    for j in range(j_max):
        state = schedule.state(j)
        identities = schedule.check_identities(j)
        result.identities.append(identities)
        if not identities.passed:
            raise ErrorBoundExceeded(f"Schedule identities fail at step {j}", step=j)

        measured = current.perturbation_norm(state.m, state.r, state.s)
        if measured > state.error_bound * (1.0 + 1e-9):
            raise ErrorBoundExceeded(
                f"Step {j}: |||P_j||| = {measured:.6e} exceeds s_j E_j = {state.error_bound:.6e}",
                step=j,
                measured=measured,
                bound=state.error_bound,
            )
        if measured <= stop_tol * state.s and stop_tol > 0:
            logger.info("run: stopping at step %d, |||P_j||| = %.3e", j, measured)
            result.stopped_early = True
            break

        nxt = schedule.state(j + 1)
        current, _flow, _inverse, report = kam_step(
            current,
            state,
            delta=schedule.delta,
            next_grid=_next_grid(current, center, nxt.h),
            next_h=nxt.h,
            epsilon=state.error_bound,
        )
        limit = 4.0 * max(
            2.0 ** (1 - schedule.a - j) * math.exp(state.log_gamma + state.log_E),
            2.0 * state.E / state.h,
        )
        if 2.0 * report.displacement > limit:
            raise ErrorBoundExceeded(
                f"Step {j}: transformation displacement {report.displacement:.6e} exceeds {limit / 2:.6e}",
                step=j,
                measured=report.displacement,
                bound=limit / 2.0,
            )
        report.log_ratio = log_norm_ratio(measured, report.measured_norm)
        if j < LOG_RATIO_STEPS and report.log_ratio < MIN_LOG_RATIO:
            raise ErrorBoundExceeded(
                f"Step {j}: log-norm ratio {report.log_ratio:.4f} below {MIN_LOG_RATIO} "
                f"(|||P_j||| = {measured:.6e}, |||P_j+1||| = {report.measured_norm:.6e})",
                step=j,
                measured=report.log_ratio,
                bound=MIN_LOG_RATIO,
            )
        result.states.append(state)
        result.reports.append(report)

    result.hamiltonian = current
    return result
