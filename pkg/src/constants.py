# src/constants.py
"""
Centralized constants for the KAM Workbench.
All magic strings, numbers, and configuration defaults are defined here.
"""
import math

# =============================================================================
# Application Constants
# =============================================================================
APP_NAME = "kam-workbench"
APP_TITLE = "KAM Workbench"
APP_VERSION = "0.1.0"
APP_DESCRIPTION = (
    "Finite-truncation KAM machinery for almost-periodic perturbations "
    "and the superquadratic oscillator."
)

# =============================================================================
# Exit Codes
# =============================================================================
EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_GATE = 3

# =============================================================================
# Lattice Defaults
# =============================================================================
DEFAULT_RHO_W = 3.0
DEFAULT_ANGLE_OFFSET = 0
DEFAULT_ENUMERATION_BUDGET = 200_000

# =============================================================================
# Approximation Function Defaults
# =============================================================================
DELTA_KIND_DEFAULT = "default"
DELTA_KIND_POWER_EXP = "power-exp"
DELTA_KIND_TABLE = "table"
DELTA_KINDS = (DELTA_KIND_DEFAULT, DELTA_KIND_POWER_EXP, DELTA_KIND_TABLE)

SUP_GRID_POINTS = 512
SUP_T_START = 64.0
SUP_T_CAP = 1.0e200
SUP_REL_TOL = 1.0e-10
SUP_TAIL_DROP = 40.0  # log-units below the running max before the scan stops

DECAY_GEOMETRIC = "geometric"
DECAY_INVERSE_SQUARE = "inverse-square"
DECAY_KINDS = (DECAY_GEOMETRIC, DECAY_INVERSE_SQUARE)

DEFAULT_KAPPA = 1.5
DEFAULT_DECAY_Q = 0.5
DEFAULT_TAIL_TOL = 1.0e-12
PSI_MAX_TERMS = 2000
PSI_DIVERGENCE_RUN = 20

# =============================================================================
# Series Defaults
# =============================================================================
DEFAULT_Z_DEGREE = 4
DEFAULT_CHEBYSHEV_NODES = 9
IMAG_RESIDUE_TOL = 1.0e-12
SPECTRAL_THRESHOLD = 1.0e-14

# =============================================================================
# KAM Constants
# =============================================================================
KAM_A = 13
KAM_B = 4
KAM_C = 6
KAM_D = 8
KAM_E = 22
KAM_KAPPA = 1.5
EPSILON_STAR = 2.0 ** -22
ALPHA_NORMALIZED = 2.0
C0_FLOW = 8.0

DEFAULT_JMAX = 8
STOP_TOL = 1.0e-14
GAUSS_LEGENDRE_NODES = 8
HOMOLOGICAL_RESIDUAL_TOL = 1.0e-10
SYMPLECTIC_TOL = 1.0e-8
ZERO_DIVISOR_FLOOR = 1.0e-300
NEWTON_MAX_ITER = 50
NEWTON_TOL = 1.0e-14
IDENTITY_REL_TOL = 1.0e-12
MIN_LOG_RATIO = 1.4
LOG_RATIO_STEPS = 3
FLOW_RTOL = 1.0e-12
FLOW_ATOL = 1.0e-14

# =============================================================================
# Oscillator Defaults
# =============================================================================
TRIG_SAMPLES = 4096
TRIG_PROPERTY_TOL = 1.0e-10
PERIOD_AGREEMENT_TOL = 1.0e-8
ODE_RTOL = 1.0e-13
ODE_ATOL = 1.0e-14
TANH_SINH_T_MAX = 4.0
TANH_SINH_MAX_LEVEL = 12
TANH_SINH_TOL = 1.0e-14

INTEGRATOR_VERLET = "verlet"
INTEGRATOR_YOSHIDA = "yoshida4"
INTEGRATOR_DOP853 = "dop853"
INTEGRATORS = (INTEGRATOR_VERLET, INTEGRATOR_YOSHIDA, INTEGRATOR_DOP853)

DEFAULT_L = 1
DEFAULT_OMEGA = (1.0, math.sqrt(2.0))
DEFAULT_EPSILON = 1.0e-6
DEFAULT_RHO0 = 1.0
OSC_DEFAULT_M = 1.0
OSC_DEFAULT_R = 0.5
# share of m and r the oscillator schedule spends on mu and rho
OSC_MU_SHARE = 0.5
OSC_RHO_SHARE = 0.4
HARMONIC_CAP = 48
TABLE_CHECK_POINTS = 64
DRIFT_WINDOWS = 100
SIM_CHUNK = 65536

# =============================================================================
# Console Output Colors
# =============================================================================
COLOR_OK = "\033[92m"  # Green
COLOR_END = "\033[0m"  # End color span
COLOR_ERROR = "\033[96m"  # Cyan

# =============================================================================
# Separator Characters
# =============================================================================
SEPARATOR_LINE = "=" * 80
SEPARATOR_SHORT = "=" * 40

# =============================================================================
# Environment Variable Names
# =============================================================================
ENV_CONFIG_DIR = "KAMWB_CONFIG_DIR"
ENV_OUTPUT_DIR = "KAMWB_OUTPUT_DIR"
ENV_SEED = "KAMWB_SEED"
ENV_THREADS = "KAMWB_THREADS"
ENV_LOG_LEVEL = "KAMWB_LOG_LEVEL"

DEFAULT_CONFIG_DIR = "configs"
DEFAULT_OUTPUT_DIR = "out"
DEFAULT_SEED = 42
DEFAULT_THREADS = 1
DEFAULT_LOG_LEVEL = "WARNING"
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

# =============================================================================
# Output Files and Columns
# =============================================================================
EFFECTIVE_CONFIG_FILE = "effective_config.json"
HEADER_TEMPLATE = "# {app} {version} seed={seed} config_sha256={config_hash}"

MEASURE_COLUMNS = ("alpha", "fraction", "ci_lo", "ci_hi", "union_bound", "seed")
KAM_REPORT_COLUMNS = (
    "j",
    "m_j",
    "r_j",
    "s_j",
    "h_j",
    "E_j",
    "measured_norm",
    "bound_rhs",
    "homolog_residual",
    "sympl_residual",
    "freq_shift",
)
TRAJECTORY_COLUMNS = ("t", "x", "v", "energy", "sup_so_far")
SECTION_COLUMNS = ("n", "t", "x", "v")
TRIG_COLUMNS = ("t", "C", "S")
SPECTRUM_COLUMNS = ("order", "abs_coeff")

# =============================================================================
# Icon/Emoji Constants
# =============================================================================
ICON_SUCCESS = "✓"
ICON_WARNING = "⚠"
ICON_ERROR = "❌"

# =============================================================================
# Error Messages
# =============================================================================
ERROR_DEPENDENCY_NOT_REGISTERED = "Dependency '{name}' not registered in container"
ERROR_CONFIG_REQUIRED = "config is required in CommandContext"
ERROR_UNKNOWN_COMMAND = "Unknown command: {command}"
ERROR_CONFIG_NOT_FOUND = "Config file not found: {path}"
ERROR_CONFIG_JSON = "Malformed JSON in {path} at line {line}, column {column}: {msg}"
ERROR_NO_COVERING_SET = "No subset of the structure covers support {support}"
ERROR_CAP_TOO_LARGE = "Enumeration of {count} indices exceeds budget {budget}"
ERROR_GATE = "Smallness gate failed: {inequality}"

# =============================================================================
# Success / Info Messages
# =============================================================================
SUCCESS_CONFIG_LOADED = "Configuration loaded successfully!"
SUCCESS_WROTE_FILE = "Wrote {path}"
INFO_CONFIG_HASH = "Config hash: {config_hash}"
