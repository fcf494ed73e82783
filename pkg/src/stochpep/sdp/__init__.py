from .problem import (EXACT_MAX_N, SdpProblem, build_exact, build_multi, build_single,
                      build_sym2, build_symmetric, build_worst_scenario)
from .sdpa import (SdpaParseError, StandardSdp, export_interchange, import_interchange,
                   to_standard)
from .solver import STATUSES, BoundReport, SolverSettings, solve

__all__ = [
    "EXACT_MAX_N", "SdpProblem", "build_exact", "build_multi", "build_single", "build_sym2",
    "build_symmetric", "build_worst_scenario", "SdpaParseError", "StandardSdp",
    "export_interchange", "import_interchange", "to_standard", "STATUSES", "BoundReport",
    "SolverSettings", "solve",
]
