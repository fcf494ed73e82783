"""Performance estimation SDPs for stochastic first-order methods."""

from .analytic import DomainError
from .constraints import CovarianceClass, anti_correlated_pair, exact_covariance
from .model import (FunctionClass, InitialCondition, Method, NoiseModel, PerformanceMeasure,
                    ProblemSpec, SpecError, constant_step_sgd, noise_preset, sgd_method,
                    silver_schedule)
from .scenarios import ResultTable, run_scenario
from .sdp import (BoundReport, SolverSettings, build_exact, build_multi, build_single, build_sym2,
                  build_symmetric, build_worst_scenario, export_interchange, import_interchange,
                  solve)
from .sdp.certificate import extract_certificate
from .specfile import load_spec, loads_spec

__all__ = [
    "DomainError", "CovarianceClass", "anti_correlated_pair", "exact_covariance",
    "FunctionClass", "InitialCondition", "Method", "NoiseModel", "PerformanceMeasure",
    "ProblemSpec", "SpecError", "constant_step_sgd", "noise_preset", "sgd_method",
    "silver_schedule", "ResultTable", "run_scenario", "BoundReport", "SolverSettings",
    "build_exact", "build_multi", "build_single", "build_sym2", "build_symmetric",
    "build_worst_scenario", "export_interchange", "import_interchange", "solve",
    "extract_certificate", "load_spec", "loads_spec",
]
