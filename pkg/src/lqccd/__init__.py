"""Sparse least squares with ``lq`` penalties (``0 < q < 1``).

Exact scalar ``lq`` proximity operators, a cyclic coordinate descent solver
with a Jacobi thresholding baseline, stationarity and local-minimizer
certificates, and a synthetic recovery benchmark.
"""

__version__ = "0.1.0"

from .analysis import (
    LocalMinCertificate,
    PropertyDiagnostics,
    RelativeErrorDiagnostic,
    StationarityReport,
    certify_local_min,
    check_stationarity,
    detect_support_stabilization,
    local_min_spot_check,
    property_diagnostics,
    relative_error_diagnostic,
)
from .estimator import LqRegression
from .problem import ColumnStats, GroundTruth, Problem, column_stats, generate_instance, power_iteration, unit_columns
from .prox import (
    ProxParams,
    half_threshold,
    make_prox_params,
    prox_oracle,
    prox_scalar,
    prox_scalar_fixed_point,
    tie_break,
    two_thirds_threshold,
)
from .solvers import (
    SolveReport,
    SolverOptions,
    SolverState,
    StopReason,
    ccd_solve,
    ccd_step,
    coordinate_index,
    ijt_solve,
    ijt_step,
    init_state,
    lq_cd_reference,
    objective,
)
from .validation import ConvergenceError, DimensionMismatchError, InadmissibleStepError

__all__ = [
    "__version__",
    "LocalMinCertificate",
    "PropertyDiagnostics",
    "RelativeErrorDiagnostic",
    "StationarityReport",
    "certify_local_min",
    "check_stationarity",
    "detect_support_stabilization",
    "local_min_spot_check",
    "property_diagnostics",
    "relative_error_diagnostic",
    "LqRegression",
    "ColumnStats",
    "GroundTruth",
    "Problem",
    "column_stats",
    "generate_instance",
    "power_iteration",
    "unit_columns",
    "ProxParams",
    "half_threshold",
    "make_prox_params",
    "prox_oracle",
    "prox_scalar",
    "prox_scalar_fixed_point",
    "tie_break",
    "two_thirds_threshold",
    "SolveReport",
    "SolverOptions",
    "SolverState",
    "StopReason",
    "ccd_solve",
    "ccd_step",
    "coordinate_index",
    "ijt_solve",
    "ijt_step",
    "init_state",
    "lq_cd_reference",
    "objective",
    "ConvergenceError",
    "DimensionMismatchError",
    "InadmissibleStepError",
]
