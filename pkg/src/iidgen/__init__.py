"""Causal ideal-internal-dynamics generator: synthesis, simulation, certification."""

from .errors import (
    BudgetExhausted,
    CommonEigenvalue,
    ConfigError,
    DefectiveUnsupported,
    IIDError,
    InsufficientWindow,
    NotCyclic,
    NotHurwitz,
    NumericalFailure,
    StateBlowup,
    Uncontrollable,
)
from .model import Exosystem, GainSet, LmiRegion, Plant, validate_scenario
from .config import Scenario, load_scenario, dump_scenario
from .generator import AugmentedGenerator, StateSpace, build_augmented, build_error_system
from .analysis import NormReport, h2_norm, hinf_norm, poles_in_region, solve_lyapunov
from .synthesis import SynthesisSpec, SynthesisResult, choose_L1, synthesize_L23, verify_gains
from .sim import NoiseSpec, SimTrace, exosystem_propagate, simulate
from .oracle import SylvesterSolution, certify_trace, exact_iid, solve_sylvester

__version__ = "0.1.0"
