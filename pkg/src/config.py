# src/config.py
"""
Centralized configuration management for the KAM Workbench.
Handles environment variables and the JSON run configuration.
"""
import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
from dotenv import load_dotenv

from approx import ApproxFunction, SequenceSchedule
from apseries import (
    Analyticity,
    Frequency,
    MonomialBasis,
    ParameterGrid,
    SeriesSpace,
    TorusSeries,
)
from constants import (
    ALPHA_NORMALIZED,
    DECAY_GEOMETRIC,
    DEFAULT_CHEBYSHEV_NODES,
    DEFAULT_CONFIG_DIR,
    DEFAULT_DECAY_Q,
    DEFAULT_ENUMERATION_BUDGET,
    DEFAULT_EPSILON,
    DEFAULT_JMAX,
    DEFAULT_KAPPA,
    DEFAULT_L,
    DEFAULT_LOG_LEVEL,
    DEFAULT_OMEGA,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_RHO0,
    DEFAULT_RHO_W,
    DEFAULT_SEED,
    DEFAULT_TAIL_TOL,
    DEFAULT_THREADS,
    DEFAULT_Z_DEGREE,
    DELTA_KIND_DEFAULT,
    ENV_CONFIG_DIR,
    ENV_LOG_LEVEL,
    ENV_OUTPUT_DIR,
    ENV_SEED,
    ENV_THREADS,
    ERROR_CONFIG_JSON,
    ERROR_CONFIG_NOT_FOUND,
    HARMONIC_CAP,
    INTEGRATOR_YOSHIDA,
    INTEGRATORS,
    KAM_A,
    KAM_B,
    KAM_C,
    KAM_D,
    KAM_E,
    OSC_DEFAULT_M,
    OSC_DEFAULT_R,
    OSC_MU_SHARE,
    OSC_RHO_SHARE,
    SEPARATOR_LINE,
    STOP_TOL,
)
from errors import ConfigFileError, ConfigValidationError
from kam.base import Hamiltonian, NormalForm
from kam.schedule import KamSchedule
from lattice import IndexWindow, ProductStructure, SpatialStructure
from oscillator import ForcingSpec
from output_writer import canonical_json

# Load environment variables from .env file
load_dotenv()

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
HAMILTONIAN_SOURCES = ("terms", "oscillator")
TERM_KINDS = ("cos", "sin", "exp")


def _check_keys(section: str, data: Mapping, cls) -> None:
    """Reject keys that name no field of the section dataclass."""
    if not isinstance(data, Mapping):
        raise ConfigValidationError(f"Section '{section}' must be a JSON object")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigValidationError(
            f"Unknown key(s) {unknown} in section '{section}'. Allowed: {sorted(allowed)}"
        )


def _positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigValidationError(f"{name} must be a positive number, got {value}")


@dataclass
class LatticeConfig:
    """Index window and spatial structure"""

    window: Tuple[int, int] = (0, 1)
    subsets: Optional[List[List[int]]] = None
    rho_w: float = DEFAULT_RHO_W
    n: int = 1
    angle_offset: int = 0

    @classmethod
    def from_dict(cls, data: Mapping) -> "LatticeConfig":
        _check_keys("lattice", data, cls)
        config = cls(**data)
        config.window = tuple(int(i) for i in config.window)
        config.validate()
        return config

    def validate(self) -> None:
        """
        Validate by building the product structure.

        Raises:
                ConfigValidationError: If the structure is inconsistent
        """
        if len(self.window) != 2:
            raise ConfigValidationError(f"window must be [lo, hi], got {list(self.window)}")
        self.structure()

    def resolved_subsets(self) -> List[List[int]]:
        if self.subsets is not None:
            return [list(s) for s in self.subsets]
        lo, hi = self.window
        subsets = [[i] for i in range(lo, hi + 1)]
        if hi > lo:
            subsets.append(list(range(lo, hi + 1)))
        return subsets

    def structure(self) -> ProductStructure:
        window = IndexWindow(int(self.window[0]), int(self.window[1]))
        base = SpatialStructure(
            window, tuple(frozenset(s) for s in self.resolved_subsets()), float(self.rho_w)
        )
        return ProductStructure(base, n=int(self.n), angle_offset=int(self.angle_offset))

    def to_dict(self) -> Dict:
        return {
            "window": list(self.window),
            "subsets": self.resolved_subsets(),
            "rho_w": self.rho_w,
            "n": self.n,
            "angle_offset": self.angle_offset,
        }


@dataclass
class DeltaConfig:
    """Approximation function choice"""

    kind: str = DELTA_KIND_DEFAULT
    sigma: float = 0.5
    knots: List[List[float]] = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: Mapping) -> "DeltaConfig":
        _check_keys("delta", data, cls)
        config = cls(**data)
        config.validate()
        return config

    def validate(self) -> None:
        self.delta()

    def delta(self) -> ApproxFunction:
        return ApproxFunction.from_dict(asdict(self))

    def to_dict(self) -> Dict:
        return self.delta().to_dict()


@dataclass
class ScheduleConfig:
    """Analyticity parameters, sequences and iteration limits"""

    m: float = 2.5
    r: float = 4.5
    s: float = 1.0
    w: float = 0.5
    h: Optional[float] = None
    mu: float = 2.0
    rho: float = 2.0
    kappa: float = DEFAULT_KAPPA
    decay: str = DECAY_GEOMETRIC
    decay_q: float = DEFAULT_DECAY_Q
    tail_tol: float = DEFAULT_TAIL_TOL
    alpha_tilde: float = ALPHA_NORMALIZED
    j_max: int = DEFAULT_JMAX
    stop_tol: float = STOP_TOL
    a: int = KAM_A
    b: int = KAM_B
    c: int = KAM_C
    d: int = KAM_D
    e: int = KAM_E

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScheduleConfig":
        _check_keys("schedule", data, cls)
        config = cls(**data)
        config.validate()
        return config

    def validate(self) -> None:
        for name in ("m", "r", "s", "mu", "rho", "alpha_tilde"):
            _positive(name, getattr(self, name))
        if self.w < 0:
            raise ConfigValidationError(f"w must be nonnegative, got {self.w}")
        if self.h is not None and self.h < 0:
            raise ConfigValidationError(f"h must be nonnegative, got {self.h}")
        if int(self.j_max) != self.j_max or self.j_max < 0:
            raise ConfigValidationError(f"j_max must be a nonnegative integer, got {self.j_max}")
        if self.stop_tol < 0:
            raise ConfigValidationError(f"stop_tol must be nonnegative, got {self.stop_tol}")
        self.sequences()

    def sequences(self) -> SequenceSchedule:
        return SequenceSchedule(
            mu_total=self.mu,
            rho_total=self.rho,
            kappa=self.kappa,
            decay_q=self.decay_q,
            tail_tol=self.tail_tol,
            decay=self.decay,
        )

    def schedule(self, delta: ApproxFunction) -> KamSchedule:
        return KamSchedule(
            delta,
            self.sequences(),
            m=self.m,
            r=self.r,
            s=self.s,
            w=self.w,
            h=self.h,
            a=self.a,
            b=self.b,
            c=self.c,
            d=self.d,
            e=self.e,
            alpha_tilde=self.alpha_tilde,
        )

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class ResonanceConfig:
    """External frequency, nonresonance constant, caps and sampling box"""

    omega: List[float] = field(default_factory=lambda: list(DEFAULT_OMEGA))
    omega_tilde: Optional[List[float]] = None
    alpha: float = 1.0e-3
    alphas: List[float] = field(default_factory=lambda: [1.0e-2, 1.0e-3, 1.0e-4])
    weight_cap: float = 40.0
    order_cap: int = 8
    box: List[List[float]] = field(default_factory=lambda: [[1.0, 2.0]])
    samples: int = 100_000
    budget: int = DEFAULT_ENUMERATION_BUDGET

    @classmethod
    def from_dict(cls, data: Mapping) -> "ResonanceConfig":
        _check_keys("resonance", data, cls)
        config = cls(**data)
        config.validate()
        return config

    def validate(self) -> None:
        _positive("alpha", self.alpha)
        for a in self.alphas:
            _positive("alphas entry", a)
        if self.order_cap < 0:
            raise ConfigValidationError(f"order_cap must be >= 0, got {self.order_cap}")
        if self.samples < 1000:
            raise ConfigValidationError(f"samples must be at least 1000, got {self.samples}")
        if not all(math.isfinite(v) for v in self.omega):
            raise ConfigValidationError("omega entries must be finite")

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class HamiltonianConfig:
    """
    Initial Hamiltonian of a KAM run.

    source = "terms": P is the sum of the listed terms, each
    {"mode": [k..., k~...], "kind": "cos"|"sin"|"exp", "amplitude": a}
    with a a scalar or a list of z-coefficients in basis order.
    source = "oscillator": N + P is assembled from the oscillator section.
    """

    source: str = "terms"
    omega_tilde: List[float] = field(default_factory=lambda: [(1.0 + math.sqrt(5.0)) / 2.0])
    grid_half_width: float = 0.0
    grid_nodes: int = DEFAULT_CHEBYSHEV_NODES
    degree: int = DEFAULT_Z_DEGREE
    e: float = 0.0
    terms: List[Dict[str, Any]] = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: Mapping) -> "HamiltonianConfig":
        _check_keys("hamiltonian", data, cls)
        config = cls(**data)
        config.validate()
        return config

    def validate(self) -> None:
        if self.source not in HAMILTONIAN_SOURCES:
            raise ConfigValidationError(
                f"Invalid hamiltonian source: {self.source}. Must be one of {HAMILTONIAN_SOURCES}"
            )
        if self.degree < 1:
            raise ConfigValidationError(f"degree must be >= 1, got {self.degree}")
        for i, term in enumerate(self.terms):
            if "mode" not in term:
                raise ConfigValidationError(f"Term {i} has no 'mode'")
            if term.get("kind", "cos") not in TERM_KINDS:
                raise ConfigValidationError(
                    f"Term {i}: kind must be one of {TERM_KINDS}, got {term.get('kind')}"
                )

    def grid(self) -> ParameterGrid:
        return ParameterGrid.around(self.omega_tilde, self.grid_half_width, self.grid_nodes)

    def space(self, structure: ProductStructure) -> SeriesSpace:
        return SeriesSpace(structure, MonomialBasis(structure.n, self.degree), self.grid())

    def perturbation(self, space: SeriesSpace, analyticity: Analyticity) -> TorusSeries:
        """
        Raises:
                ConfigValidationError: If a mode has the wrong length
        """
        series = TorusSeries.zero(space, analyticity)
        for i, term in enumerate(self.terms):
            mode = list(term["mode"])
            if len(mode) != space.dim:
                raise ConfigValidationError(
                    f"Term {i}: mode needs {space.dim} entries (window then angles), got {len(mode)}"
                )
            amplitude = term.get("amplitude", 1.0)
            kind = term.get("kind", "cos")
            if kind == "cos":
                piece = TorusSeries.cosine(space, mode, amplitude, analyticity)
            elif kind == "sin":
                piece = TorusSeries.sine(space, mode, amplitude, analyticity)
            else:
                piece = TorusSeries.from_terms(space, [(mode, amplitude)], analyticity)
            series = series + piece
        return series.with_analyticity(analyticity)

    def hamiltonian(
        self, structure: ProductStructure, frequency: Frequency, analyticity: Analyticity
    ) -> Hamiltonian:
        space = self.space(structure)
        normal = NormalForm(np.full(space.grid.size, float(self.e)), frequency, space.grid)
        return Hamiltonian(normal, self.perturbation(space, analyticity))

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class OscillatorConfig:
    """Forcing, chart and simulation settings of the superquadratic oscillator"""

    l: int = DEFAULT_L
    epsilon: float = DEFAULT_EPSILON
    rho0: float = DEFAULT_RHO0
    coefficients: Dict[str, Dict[str, Any]] = field(
        default_factory=lambda: {
            "0": {"cosines": [[[1, 0], 1.0], [[0, 1], 1.0]]},
            "1": {"cosines": [[[1, 1], 0.5]]},
        }
    )
    m: float = OSC_DEFAULT_M
    r: float = OSC_DEFAULT_R
    degree: int = DEFAULT_Z_DEGREE
    harmonic_cap: int = HARMONIC_CAP
    x0: float = 1.0
    v0: float = 0.0
    T: float = 1000.0
    dt: float = 0.01
    integrator: str = INTEGRATOR_YOSHIDA
    record_every: int = 100
    section_phase: float = 0.0
    enforce_gate: bool = True

    @classmethod
    def from_dict(cls, data: Mapping) -> "OscillatorConfig":
        _check_keys("oscillator", data, cls)
        config = cls(**data)
        config.validate()
        return config

    def validate(self) -> None:
        if int(self.l) != self.l or self.l < 0:
            raise ConfigValidationError(f"l must be a nonnegative integer, got {self.l}")
        for name in ("epsilon", "rho0", "m", "r", "T", "dt"):
            _positive(name, getattr(self, name))
        if self.integrator not in INTEGRATORS:
            raise ConfigValidationError(
                f"Invalid integrator: {self.integrator}. Must be one of {INTEGRATORS}"
            )
        if self.record_every < 1:
            raise ConfigValidationError(f"record_every must be >= 1, got {self.record_every}")

    def forcing(self, frequency: Frequency) -> ForcingSpec:
        data = frequency.to_dict()
        data.update({"l": self.l, "epsilon": self.epsilon, "coefficients": self.coefficients})
        return ForcingSpec.from_dict(data)

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class OutputConfig:
    """Output directory, seed, worker count and log level"""

    out_dir: Path
    seed: int
    threads: int
    log_level: str

    @classmethod
    def from_env(cls) -> "OutputConfig":
        """Create output configuration from environment variables"""
        try:
            return cls(
                out_dir=Path(os.getenv(ENV_OUTPUT_DIR, DEFAULT_OUTPUT_DIR)),
                seed=int(os.getenv(ENV_SEED, str(DEFAULT_SEED))),
                threads=int(os.getenv(ENV_THREADS, str(DEFAULT_THREADS))),
                log_level=os.getenv(ENV_LOG_LEVEL, DEFAULT_LOG_LEVEL).upper(),
            )
        except ValueError as e:
            raise ConfigValidationError(f"Invalid output environment variable: {e}") from e

    def validate(self) -> None:
        """
        Raises:
                ConfigValidationError: If threads or log level are invalid
        """
        if self.threads < 1:
            raise ConfigValidationError(f"threads must be >= 1, got {self.threads}")
        if self.seed < 0:
            raise ConfigValidationError(f"seed must be nonnegative, got {self.seed}")
        if self.log_level not in LOG_LEVELS:
            raise ConfigValidationError(
                f"Invalid log level: {self.log_level}. Must be one of {LOG_LEVELS}"
            )

    @property
    def numeric_log_level(self) -> int:
        return getattr(logging, self.log_level)

    def to_dict(self) -> Dict:
        return {
            "out_dir": str(self.out_dir),
            "seed": self.seed,
            "threads": self.threads,
            "log_level": self.log_level,
        }


SECTIONS = {
    "lattice": LatticeConfig,
    "delta": DeltaConfig,
    "schedule": ScheduleConfig,
    "resonance": ResonanceConfig,
    "hamiltonian": HamiltonianConfig,
    "oscillator": OscillatorConfig,
}


def resolve_config_path(path) -> Path:
    """
    Resolve a config path, falling back to the default config directory.

    Raises:
            ConfigFileError: If neither location holds the file
    """
    candidate = Path(path)
    if candidate.exists():
        return candidate
    if not candidate.is_absolute():
        fallback = Path(os.getenv(ENV_CONFIG_DIR, DEFAULT_CONFIG_DIR)) / candidate
        if fallback.exists():
            return fallback
    raise ConfigFileError(ERROR_CONFIG_NOT_FOUND.format(path=path))


@dataclass
class AppConfig:
    """Main application configuration container (the run configuration)"""

    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    delta: DeltaConfig = field(default_factory=DeltaConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    resonance: ResonanceConfig = field(default_factory=ResonanceConfig)
    hamiltonian: HamiltonianConfig = field(default_factory=HamiltonianConfig)
    oscillator: OscillatorConfig = field(default_factory=OscillatorConfig)
    output: OutputConfig = field(default_factory=OutputConfig.from_env)
    source: Optional[Path] = None

    @classmethod
    def from_env(cls) -> "AppConfig":
        """
        Default sections with output settings from the environment.

        Raises:
                ValueError: If any configuration is invalid
        """
        output = OutputConfig.from_env()
        output.validate()
        return cls(output=output)

    @classmethod
    def from_dict(cls, data: Mapping, source: Optional[Path] = None) -> "AppConfig":
        """
        Build from a parsed JSON object; the "output" section may override
        out_dir, seed, threads and log_level.

        Raises:
                ConfigValidationError: On unknown sections or keys, or invalid values
        """
        if not isinstance(data, Mapping):
            raise ConfigValidationError("Configuration root must be a JSON object")
        unknown = sorted(set(data) - set(SECTIONS) - {"output"})
        if unknown:
            raise ConfigValidationError(
                f"Unknown section(s) {unknown}. Allowed: {sorted(SECTIONS) + ['output']}"
            )
        sections = {
            name: section.from_dict(data[name]) for name, section in SECTIONS.items() if name in data
        }
        output = OutputConfig.from_env()
        overrides = data.get("output", {})
        _check_keys("output", overrides, OutputConfig)
        if "out_dir" in overrides:
            overrides = dict(overrides, out_dir=Path(overrides["out_dir"]))
        if "log_level" in overrides:
            overrides = dict(overrides, log_level=str(overrides["log_level"]).upper())
        output = replace(output, **overrides)
        output.validate()
        return cls(output=output, source=source, **sections)

    @classmethod
    def load(cls, path) -> "AppConfig":
        """
        Load a JSON run configuration.

        Raises:
                ConfigFileError: If the file is missing or not valid JSON
                ConfigValidationError: If a section is invalid
        """
        resolved = resolve_config_path(path)
        text = resolved.read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigFileError(
                ERROR_CONFIG_JSON.format(path=resolved, line=e.lineno, column=e.colno, msg=e.msg),
                line=e.lineno,
                column=e.colno,
            ) from e
        return cls.from_dict(data, source=resolved)

    def with_output(self, **overrides) -> "AppConfig":
        """Copy with output settings replaced; None values are ignored."""
        values = {k: v for k, v in overrides.items() if v is not None}
        if "out_dir" in values:
            values["out_dir"] = Path(values["out_dir"])
        if "log_level" in values:
            values["log_level"] = str(values["log_level"]).upper()
        output = replace(self.output, **values)
        output.validate()
        return replace(self, output=output)

    # ------------------------------------------------------------------
    # derived objects
    # ------------------------------------------------------------------
    def structure(self) -> ProductStructure:
        return self.lattice.structure()

    def frequency(self) -> Frequency:
        return Frequency(self.structure().window, tuple(float(v) for v in self.resonance.omega))

    def oscillator_sequences(self) -> SequenceSchedule:
        """
        The configured sequences with mu and rho rescaled to the oscillator's
        m and r; kappa, decay and tail tolerance stay as configured.
        """
        osc = self.oscillator
        return replace(
            self.schedule, mu=OSC_MU_SHARE * osc.m, rho=OSC_RHO_SHARE * osc.r
        ).sequences()

    def analyticity(self) -> Analyticity:
        s = self.schedule
        h = s.h if s.h is not None else s.schedule(self.delta.delta()).h
        return Analyticity(m=s.m, r=s.r, s=s.s, h=h, w=s.w)

    def to_dict(self) -> Dict:
        data = {name: getattr(self, name).to_dict() for name in SECTIONS}
        data["output"] = self.output.to_dict()
        return data

    def config_hash(self) -> str:
        """sha256 of the canonical JSON of every section except output."""
        data = self.to_dict()
        data.pop("output")
        return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()

    def print_summary(self) -> None:
        """Print a summary of the current configuration"""
        window = self.lattice.window
        print("\n" + SEPARATOR_LINE)
        print("Configuration Summary")
        print(SEPARATOR_LINE)
        print(f"Source: {self.source or 'defaults'}")
        print(f"Window: [{window[0]}, {window[1]}]  Subsets: {self.lattice.resolved_subsets()}")
        print(f"Delta: {self.delta.to_dict()}")
        print(f"Frequency: {self.resonance.omega}")
        print(
            f"Schedule: m={self.schedule.m}, r={self.schedule.r}, s={self.schedule.s}, "
            f"mu={self.schedule.mu}, rho={self.schedule.rho}, j_max={self.schedule.j_max}"
        )
        print(f"Oscillator: l={self.oscillator.l}, epsilon={self.oscillator.epsilon}")
        print(
            f"Output: {self.output.out_dir} (seed={self.output.seed}, threads={self.output.threads})"
        )
        print(SEPARATOR_LINE + "\n")


# Convenience function for quick access
def load_config(path=None) -> AppConfig:
    """
    Load and validate application configuration.

    Args:
            path: JSON run configuration; defaults only when omitted

    Returns:
            AppConfig: Validated application configuration

    Raises:
            ValueError: If configuration is invalid
    """
    if path is None:
        return AppConfig.from_env()
    return AppConfig.load(path)


# Example usage demonstration
if __name__ == "__main__":
    try:
        config = load_config()
        config.print_summary()
        print("✓ Configuration loaded successfully!")
    except ValueError as e:
        print(f"❌ Configuration error: {e}")
