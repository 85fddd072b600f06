"""Coderivative-based generalized Newton methods for ``minimize f(x) + g(x)``."""

from .core import (CompositeProblem, ConfigError, IterationRecord, LinearOperator,
                   SolverConfig, make_config, validate_operator_adjoint)
from .regularizers import L0Norm, ZeroReg
from .smooth_models import BlurModel, LeastSquaresRidge, StudentT
from .solvers import (DirectionStrategy, SolveTrace, criticality_report, solve_gcnm,
                      solve_glpg, solve_pgm, solve_pure_newton)

__version__ = "0.1.0"
