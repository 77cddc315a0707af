"""Rank-one completion of partially observed tensors via recursive flattening."""

from .analysis import (
    AnalysisReport,
    ModeCheck,
    bipartite_connected,
    is_determinable,
    is_extractable,
    is_mod_full,
    observation_graph_connected,
    verify_unique_completion_hypotheses,
)
from .baseline import NlsOptions, NlsResult, nls_fit
from .completion import (
    CompleteOptions,
    CompletionResult,
    LevelRecord,
    ModeStats,
    complete,
    extract_vector,
    select_mode,
    solve_mode_vector,
)
from .generator import (
    GeneratedInstance,
    GeneratorConfig,
    make_instance,
    perturb,
    random_observation_set,
    random_rank_one,
    rank_one_values,
)
from .linsys import (
    NumericalError,
    SingularTriplet,
    SparseSystem,
    StabilityBound,
    build_system,
    nullspace_dimension,
    row_equilibrated,
    smallest_singular,
    stability_constant,
)
from .metrics import Metrics, completion_errors
from .tensor import (
    FlattenedView,
    PartialTensor,
    flatten,
    omega_norm,
    outer_values,
    reshape_solution,
    residual_on_omega,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport",
    "CompleteOptions",
    "CompletionResult",
    "FlattenedView",
    "GeneratedInstance",
    "GeneratorConfig",
    "LevelRecord",
    "Metrics",
    "ModeCheck",
    "ModeStats",
    "NlsOptions",
    "NlsResult",
    "NumericalError",
    "PartialTensor",
    "SingularTriplet",
    "SparseSystem",
    "StabilityBound",
    "bipartite_connected",
    "build_system",
    "complete",
    "completion_errors",
    "extract_vector",
    "flatten",
    "is_determinable",
    "is_extractable",
    "is_mod_full",
    "make_instance",
    "nls_fit",
    "nullspace_dimension",
    "observation_graph_connected",
    "omega_norm",
    "outer_values",
    "perturb",
    "random_observation_set",
    "random_rank_one",
    "rank_one_values",
    "reshape_solution",
    "residual_on_omega",
    "row_equilibrated",
    "select_mode",
    "smallest_singular",
    "solve_mode_vector",
    "stability_constant",
    "verify_unique_completion_hypotheses",
]
