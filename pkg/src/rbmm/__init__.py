"""Riemannian block majorization-minimization toolkit."""

from .geometry import (
    SPD,
    DegenerateInput,
    Euclidean,
    FixedRank,
    GeometryError,
    Point,
    ProductPoint,
    Sphere,
    Stiefel,
    TangentVector,
    UnsupportedKind,
    ambient_shape,
    check_point,
    dist,
    egrad_to_rgrad,
    exp_map,
    grad_dist_sq,
    injectivity_floor,
    inner,
    log_map,
    norm,
    proj_manifold,
    proj_tangent,
    r_hat,
    random_point,
    random_tangent,
    retract,
    transport,
    zero_tangent,
)
from .surrogates import (
    EUCLIDEAN_PROXIMAL,
    IDENTITY,
    PROX_LINEAR,
    REGULARIZED_LINEAR_STIEFEL,
    RIEMANNIAN_PROXIMAL,
    BlockResult,
    EuclideanBall,
    GeodesicBall,
    LineSearchFailure,
    MajorizationReport,
    SurrogateSpec,
    UnsupportedFamily,
    WholeManifold,
    build_surrogate,
    check_majorization,
    minimize_block,
)
from .driver import (
    AuditReport,
    BlockProblem,
    IterationRecord,
    RunResult,
    SolverConfig,
    audit_trace,
    run_rbmm,
    stationarity_measure,
)
from .diagnostics import (
    ProbeReport,
    RateFit,
    circle_gsmooth_probe,
    distance_equivalence_probe,
    euclidean_gsmooth_probe,
    fd_gradient_check,
    gsmooth_probe,
    rate_fit,
)

__version__ = "0.1.0"

__all__ = [
    "SPD",
    "DegenerateInput",
    "Euclidean",
    "FixedRank",
    "GeometryError",
    "Point",
    "ProductPoint",
    "Sphere",
    "Stiefel",
    "TangentVector",
    "UnsupportedKind",
    "ambient_shape",
    "check_point",
    "dist",
    "egrad_to_rgrad",
    "exp_map",
    "grad_dist_sq",
    "injectivity_floor",
    "inner",
    "log_map",
    "norm",
    "proj_manifold",
    "proj_tangent",
    "r_hat",
    "random_point",
    "random_tangent",
    "retract",
    "transport",
    "zero_tangent",
    "RIEMANNIAN_PROXIMAL",
    "EUCLIDEAN_PROXIMAL",
    "PROX_LINEAR",
    "REGULARIZED_LINEAR_STIEFEL",
    "IDENTITY",
    "BlockResult",
    "EuclideanBall",
    "GeodesicBall",
    "LineSearchFailure",
    "MajorizationReport",
    "SurrogateSpec",
    "UnsupportedFamily",
    "WholeManifold",
    "build_surrogate",
    "check_majorization",
    "minimize_block",
    "AuditReport",
    "BlockProblem",
    "IterationRecord",
    "RunResult",
    "SolverConfig",
    "audit_trace",
    "run_rbmm",
    "stationarity_measure",
    "ProbeReport",
    "RateFit",
    "circle_gsmooth_probe",
    "distance_equivalence_probe",
    "euclidean_gsmooth_probe",
    "fd_gradient_check",
    "gsmooth_probe",
    "rate_fit",
    "__version__",
]
