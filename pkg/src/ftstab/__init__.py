"""Finite-time stabilizability of decoupled 1-D hyperbolic systems.

Decides whether every solution of a reflection-coupled system of transport
equations dies out after a fixed time, bounds that time, and verifies the
verdicts with an exact method-of-characteristics solver.
"""

from .expr import (
    ExprError,
    ExprEvalError,
    ExprSyntaxError,
    UnknownIdentifierError,
    eval_expr,
    parse_expr,
    to_source,
)
from .graph_criteria import (
    CriteriaReport,
    SignPattern,
    is_acyclic,
    nilpotency_index,
    principal_minors_all_zero,
    product_condition,
    robust_fts_report,
    sign_pattern,
)
from .model import (
    BoundaryMatrix,
    GainEntry,
    HyperbolicSystem,
    InitialData,
    SystemValidationError,
    ValidationReport,
    is_autonomous,
    make_system,
    require_valid,
    validate_system,
)
from .simulator import (
    BoundaryTrace,
    CharFoot,
    DecayCurve,
    VanishingReport,
    bump_profile,
    decay_curve,
    default_probe_family,
    evaluate_solution,
    march_boundary_trace,
    snapshot_from_trace,
    solution_snapshot,
    trace_characteristic,
    verify_vanishing,
)
from .spectral import (
    DirichletPolynomial,
    SpectrumReport,
    TransformedBoundary,
    TravelTimes,
    Window,
    compute_travel_times,
    expand_characteristic,
    find_roots,
    is_spectrum_empty,
    spectrum_report,
    transform_boundary,
)
from .stabtime import NotNilpotentError, PathSetI, TimeReport, path_set, time_report

__version__ = "0.1.0"
