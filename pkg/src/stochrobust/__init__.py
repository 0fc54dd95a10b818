"""Stochastic robustness of STL formulas over population models.

Simulate CTMC reaction networks (exact SSA) and piecewise-deterministic
hybrid models, estimate the distribution of STL robustness scores, and
maximise average robustness over model or formula parameters with GP-UCB.
"""

__version__ = "0.1.0"

from .builtins import (
    REPRESSILATOR_FORMULA,
    REPRESSILATOR_FORMULA_PARAMS,
    SCHLOGL_FORMULA,
    SCHLOGL_FORMULA_PARAMS,
    builtin_repressilator,
    builtin_schlogl,
)
from .errors import (
    FormulaSyntaxError,
    ModelError,
    ModelEvaluationError,
    ModelSyntaxError,
    MonitorError,
    NumericalError,
    RunError,
    StochRobustError,
)
from .gp import GpPosterior, KernelConfig, fit, predict, rbf_kernel
from .model import (
    HybridModel,
    ReactionNetwork,
    fluid_vector_field,
    model_hash,
    parse_model,
    propensity,
    render,
)
from .monitor import RobustnessValue, robustness, robustness_oracle
from .optimize import (
    OptimizationResult,
    OptimizerConfig,
    Param,
    SearchSpace,
    gp_ucb_optimize,
    maximize,
    penalized_objective,
    ucb_acquisition,
)
from .sim import RngStream, SimConfig, Trajectory, pdmp_simulate, sample_ensemble, simulate, ssa_simulate
from .stats import RobustnessSummary, correlation, estimate, estimate_many, histogram, probability_ci
from .stl import Formula, parse_formula
