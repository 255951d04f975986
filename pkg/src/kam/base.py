# src/kam/base.py
"""
Core types of the KAM engine: normal forms, Hamiltonians, generators,
per-step parameter state and step reports.
"""
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np

from apseries import Frequency, ParameterGrid, TorusSeries
from constants import KAM_REPORT_COLUMNS
from errors import ConfigValidationError


@dataclass
class NormalForm:
    """
    N = e(w~) + <omega, J> + <w~, z>, with e sampled on the parameter grid.
    """

    e: np.ndarray
    omega: Frequency
    grid: ParameterGrid

    def __post_init__(self):
        self.e = np.asarray(self.e, dtype=float).reshape(-1)
        if self.e.shape[0] != self.grid.size:
            raise ConfigValidationError(
                f"NormalForm has {self.e.shape[0]} values for {self.grid.size} grid nodes"
            )

    @property
    def omega_tilde(self) -> np.ndarray:
        """Internal frequencies at the grid nodes, shape (P, n)."""
        return self.grid.nodes

    def value(self, J: np.ndarray, z: np.ndarray, node: int = 0) -> float:
        return float(
            self.e[node] + np.dot(self.omega.array, J) + np.dot(self.omega_tilde[node], z)
        )

    def shifted(self, e_hat: np.ndarray) -> "NormalForm":
        return NormalForm(self.e + np.asarray(e_hat, dtype=float), self.omega, self.grid)

    def reparametrized(self, matrix: np.ndarray, grid: ParameterGrid) -> "NormalForm":
        return NormalForm(matrix @ self.e, self.omega, grid)

    def scaled(self, factor: float) -> "NormalForm":
        return NormalForm(factor * self.e, self.omega.scaled(factor), self.grid.scaled(factor))

    def to_dict(self) -> Dict:
        return {
            "e": self.e.tolist(),
            "omega": self.omega.to_dict(),
            "grid": self.grid.to_dict(),
        }


@dataclass
class Hamiltonian:
    """H = N + P with P free of J"""

    normal: NormalForm
    perturbation: TorusSeries

    def __post_init__(self):
        if self.perturbation.space.grid.size != self.normal.grid.size:
            raise ConfigValidationError("Perturbation and normal form use different grids")

    @property
    def space(self):
        return self.perturbation.space

    def perturbation_norm(self, m=None, r=None, s=None) -> float:
        return self.perturbation.norm_total(m, r, s)

    def rescaled(self, factor: float) -> "Hamiltonian":
        """
        Hamiltonian of the time-rescaled system t -> factor * t.

        Every frequency and the perturbation scale by factor; the parameter
        grid scales with the internal frequencies.
        """
        normal = self.normal.scaled(factor)
        space = self.space.with_grid(normal.grid)
        p = self.perturbation
        perturbation = TorusSeries(space, p.modes, factor * p.coeffs, p.analyticity, canonical=True)
        return Hamiltonian(normal, perturbation)


@dataclass
class NormalIncrement:
    """N^ = e^(w~) + <v(w~), z>: the angle means of the truncated perturbation"""

    e_hat: np.ndarray
    v: np.ndarray
    series: TorusSeries

    @property
    def shift_norm(self) -> float:
        return float(np.max(np.abs(self.v))) if self.v.size else 0.0


@dataclass
class Generator:
    """F = F0 + <F1, z>: zero mean, J-free, first order in z"""

    series: TorusSeries

    def is_zero(self) -> bool:
        return self.series.is_zero()

    @cached_property
    def F0(self) -> TorusSeries:
        return self.series.degree_part(0)

    def F1(self, i: int) -> TorusSeries:
        """Coefficient of z_i (1-based) as a z-free series."""
        s = self.series
        basis = s.space.basis
        coeffs = np.zeros_like(s.coeffs)
        coeffs[:, :, 0] = s.coeffs[:, :, basis.unit(i - 1)]
        return TorusSeries(s.space, s.modes, coeffs, s.analyticity)

    def coefficient_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(modes, C0 of shape (M, P), C1 of shape (M, P, n))."""
        s = self.series
        basis = s.space.basis
        c0 = s.coeffs[:, :, 0]
        c1 = np.stack([s.coeffs[:, :, basis.unit(j)] for j in range(s.space.n)], axis=-1)
        return s.modes, c0, c1


@dataclass
class KamState:
    """
    Parameters of one KAM step.

    log_gamma is log Gamma_j including the 2^(j+a) factor; gamma_mu_rho is
    Gamma_0(mu) Gamma_1(rho) alone, which enters the step bounds.
    """

    j: int
    m: float
    r: float
    s: float
    h: float
    w: float
    mu: float
    rho: float
    K: float
    eta: float
    log_E: float
    log_gamma: float
    log_gamma_mu_rho: float
    epsilon: Optional[float] = None

    @property
    def E(self) -> float:
        return math.exp(self.log_E)

    @property
    def gamma(self) -> float:
        return math.exp(self.log_gamma)

    @property
    def gamma_mu_rho(self) -> float:
        return math.exp(self.log_gamma_mu_rho)

    @property
    def error_bound(self) -> float:
        """s_j E_j, the admissible size of |||P_j|||."""
        return self.s * self.E

    def to_dict(self) -> Dict:
        return {
            "j": self.j,
            "m": self.m,
            "r": self.r,
            "s": self.s,
            "h": self.h,
            "mu": self.mu,
            "rho": self.rho,
            "K": self.K,
            "eta": self.eta,
            "log_E": self.log_E,
            "log_gamma": self.log_gamma,
        }


@dataclass
class KamStepReport:
    """Diagnostics of one KAM step; every residual is nonnegative"""

    j: int
    m: float
    r: float
    s: float
    h: float
    E: float
    input_norm: float = 0.0
    measured_norm: float = 0.0
    bound_rhs: float = 0.0
    truncation_residual: float = 0.0
    truncation_bound: float = 0.0
    homological_residual: float = 0.0
    symplectic_residual: float = 0.0
    frequency_shift: float = 0.0
    inversion_residual: float = 0.0
    displacement: float = 0.0
    displacement_bound: float = 0.0
    extended_divisor_h: float = math.inf
    log_ratio: float = math.nan
    notes: List[str] = field(default_factory=list)

    def as_row(self) -> Tuple:
        values = {
            "j": self.j,
            "m_j": self.m,
            "r_j": self.r,
            "s_j": self.s,
            "h_j": self.h,
            "E_j": self.E,
            "measured_norm": self.measured_norm,
            "bound_rhs": self.bound_rhs,
            "homolog_residual": self.homological_residual,
            "sympl_residual": self.symplectic_residual,
            "freq_shift": self.frequency_shift,
        }
        return tuple(values[c] for c in KAM_REPORT_COLUMNS)
