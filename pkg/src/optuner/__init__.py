"""Sound per-call-site tuning of math library implementations.

Given a floating-point expression over an input box, optuner builds a
linear model of its rounding error in terms of each call site's
implementation accuracy, solves for the speed/accuracy Pareto frontier
exactly, and re-verifies each configuration with a sound error bound.
"""

from importlib import resources

from .catalog import Catalog, ImplSpec, builtin_catalog, load_catalog, measure_accuracy, save_catalog
from .emit import emit_c
from .error_model import (ErrorModel, build_error_model, differentiate, evaluate_model,
                          lagrange_remainder, verify_configuration)
from .errors import (BudgetExhausted, CatalogError, DomainError, InfeasibleError, NotFoundError,
                     OptunerError, ParseError)
from .expr import CallSequence, Expr, InputSpec, evaluate, linearize, parse_expression
from .ilp import Candidate, Conditional, SelectionProblem, dominates, iter_pareto, solve_pareto
from .optimize import Interval, OptimizerConfig, interval_eval, maximize, maximize_abs, range_of
from .tuner import (Configuration, RangeConstraint, TuningReport, build_problem, pareto_filter,
                    tune)

__version__ = "0.1.0"

BENCHMARKS = ("povprog", "logexp", "problem_3_3_2", "complex_sine", "expsin")


def load_benchmark(name: str) -> str:
    """FPCore source text of a shipped benchmark."""
    if name not in BENCHMARKS:
        raise NotFoundError(f"no benchmark {name!r}; have {', '.join(BENCHMARKS)}")
    return resources.files(__package__).joinpath("benchmarks", f"{name}.fpcore").read_text()


__all__ = [
    "BENCHMARKS", "BudgetExhausted", "CallSequence", "Candidate", "Catalog", "CatalogError",
    "Conditional", "Configuration", "DomainError", "ErrorModel", "Expr", "ImplSpec",
    "InfeasibleError", "InputSpec", "Interval", "NotFoundError", "OptimizerConfig",
    "OptunerError", "ParseError", "RangeConstraint", "SelectionProblem", "TuningReport",
    "build_error_model", "build_problem", "builtin_catalog", "differentiate", "dominates",
    "emit_c", "evaluate", "evaluate_model", "interval_eval", "iter_pareto", "lagrange_remainder",
    "linearize", "load_benchmark", "load_catalog", "maximize", "maximize_abs",
    "measure_accuracy", "pareto_filter", "range_of", "save_catalog", "solve_pareto", "tune",
    "verify_configuration",
]
