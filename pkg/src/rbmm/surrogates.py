"""Majorizing surrogates and per-block minimization.

A surrogate is built at an anchor point from a block's marginal objective:
it touches the objective at the anchor and dominates it everywhere on the
feasible set.  Five families are provided:

- ``riemannian_proximal``: f + (lam/2) * dist(theta, anchor)^2
- ``euclidean_proximal``:  f + (lam/2) * ||theta - anchor||_F^2
- ``prox_linear``:         f(a) + <grad f(a), theta - a> + (lam/2)||theta - a||^2
  (lam may be a positive array for per-entry weights)
- ``regularized_linear_stiefel``: f(a) - 2<R(a), theta - a> + lam||theta - a||_F^2
  on Stiefel blocks, where R is a map with f(theta) = -<theta, R(theta)>;
  by default R(a) is recovered from the gradient as -grad f(a)/2
- ``identity``:            g = f (plain block minimization / ALS baseline)

``minimize_block`` dispatches to a closed form where one exists (projected
gradient step for prox_linear, polar projection for the regularized linear
family) and otherwise runs monotone Riemannian descent with Armijo
backtracking, reporting an upper bound on the suboptimality of the returned
point.  The bound is certified exact (0) for closed forms and certified via
strong convexity when a positive margin ``lam - L`` is known on a flat or
SPD block; otherwise it is a flagged heuristic.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional, Union

import numpy as np
import numpy.linalg as la

from .geometry import (
    SPD,
    DegenerateInput,
    Euclidean,
    FixedRank,
    GeometryError,
    Point,
    Sphere,
    Stiefel,
    TangentVector,
    dist,
    egrad_to_rgrad,
    exp_map,
    inner,
    log_map,
    norm,
    proj_manifold,
    proj_tangent,
    random_tangent,
    retract,
)

RIEMANNIAN_PROXIMAL = "riemannian_proximal"
EUCLIDEAN_PROXIMAL = "euclidean_proximal"
PROX_LINEAR = "prox_linear"
REGULARIZED_LINEAR_STIEFEL = "regularized_linear_stiefel"
IDENTITY = "identity"

FAMILIES = frozenset(
    {
        RIEMANNIAN_PROXIMAL,
        EUCLIDEAN_PROXIMAL,
        PROX_LINEAR,
        REGULARIZED_LINEAR_STIEFEL,
        IDENTITY,
    }
)

# Boundary classification: a point is "on" the boundary of a ball when the
# remaining slack is below this fraction of the radius.
BOUNDARY_RTOL = 1e-9

ARMIJO_SIGMA = 1e-4
ARMIJO_BETA = 0.5
MAX_BACKTRACKS = 60


class UnsupportedFamily(Exception):
    """Surrogate family is undefined for this manifold kind or constraint."""


class LineSearchFailure(Exception):
    """Armijo search exhausted its backtracking budget; the search
    direction is not a descent direction or the gradient is broken."""


# ---------------------------------------------------------------------------
# Constraint descriptors


@dataclasses.dataclass(frozen=True)
class WholeManifold:
    pass


@dataclasses.dataclass(frozen=True, eq=False)
class EuclideanBall:
    """Ambient Frobenius ball { x : ||x - center|| <= radius }."""

    center: Point
    radius: float


@dataclasses.dataclass(frozen=True, eq=False)
class GeodesicBall:
    """Geodesic ball { x : dist(x, center) <= radius }; only meaningful on
    kinds with a log map (Euclidean, Sphere, SPD)."""

    center: Point
    radius: float


Constraint = Union[WholeManifold, EuclideanBall, GeodesicBall]


def constraint_distance(constraint: Constraint, x: Point) -> float:
    """Distance from the ball center (0 for whole-manifold constraints)."""
    if isinstance(constraint, WholeManifold):
        return 0.0
    if isinstance(constraint, EuclideanBall):
        return float(la.norm(x.data - constraint.center.data))
    if isinstance(constraint, GeodesicBall):
        return dist(x, constraint.center)
    raise TypeError(f"unknown constraint {constraint!r}")


def satisfies_constraint(
    constraint: Constraint, x: Point, slack: float = 1e-9
) -> bool:
    if isinstance(constraint, WholeManifold):
        return True
    d = constraint_distance(constraint, x)
    return d <= constraint.radius * (1.0 + slack) + slack


def on_boundary(constraint: Constraint, x: Point) -> bool:
    if isinstance(constraint, WholeManifold):
        return False
    d = constraint_distance(constraint, x)
    return constraint.radius - d <= BOUNDARY_RTOL * constraint.radius


def project_into(constraint: Constraint, x: Point) -> Point:
    """Pull a point back inside a ball.

    Euclidean balls scale radially in the ambient space; geodesic balls
    scale the log-map coordinate from the center (radial move in normal
    coordinates, exact for the ball geometry even though it is not a metric
    projection of the ambient space).
    """
    if isinstance(constraint, WholeManifold):
        return x
    d = constraint_distance(constraint, x)
    if d <= constraint.radius:
        return x
    c = constraint.center
    if isinstance(constraint, EuclideanBall):
        scaled = c.data + (x.data - c.data) * (constraint.radius / d)
        return Point(x.manifold, scaled)
    lv = log_map(c, x)
    pulled = TangentVector(c, lv.data * (constraint.radius / d))
    return exp_map(c, pulled)


def _outward_radial(constraint: Constraint, x: Point) -> Optional[TangentVector]:
    """Unit outward radial direction at x, or None when undefined."""
    if isinstance(constraint, EuclideanBall):
        raw = proj_tangent(x, x.data - constraint.center.data)
    else:
        lv = log_map(x, constraint.center)
        raw = TangentVector(x, -lv.data)
    n = norm(x, raw)
    if n <= 1e-14:
        return None
    return TangentVector(x, raw.data / n)


def cone_project_descent(
    constraint: Constraint, x: Point, v: TangentVector
) -> TangentVector:
    """Project a candidate direction onto the feasible cone at x: when x
    sits on the ball boundary, the component pushing radially outward is
    removed.  Interior points and whole-manifold constraints pass through."""
    if isinstance(constraint, WholeManifold) or not on_boundary(constraint, x):
        return v
    rho = _outward_radial(constraint, x)
    if rho is None:
        return v
    out = inner(x, v, rho)
    if out <= 0.0:
        return v
    return TangentVector(x, v.data - out * rho.data)


# ---------------------------------------------------------------------------
# Surrogate construction


@dataclasses.dataclass(frozen=True)
class SurrogateSpec:
    """Which majorizer family to build for one block.

    ``lam`` is the proximal weight: a positive number, a positive array
    (per-entry weights, prox_linear only), or a callable
    ``lam(cycle, state, block) -> number | array`` resolved by the driver
    each cycle.  ``r_map`` overrides the linear-term map of the
    regularized_linear_stiefel family; the default recovers it from the
    marginal gradient as R(a) = -grad f(a) / 2.
    """

    family: str
    lam: Union[float, np.ndarray, Callable] = 1.0
    inner_budget: int = 200
    inner_tol: float = 1e-9
    r_map: Optional[Callable] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnsupportedFamily(f"unknown surrogate family {self.family!r}")


def resolve_lam(spec: SurrogateSpec, cycle: int, state, block: int):
    """Resolve the proximal weight for one cycle; validates positivity."""
    lam = spec.lam
    if callable(lam):
        lam = lam(cycle, state, block)
    lam = np.asarray(lam, dtype=float) if not np.isscalar(lam) else float(lam)
    arr = np.asarray(lam)
    if np.any(arr < 0.0):
        raise ValueError("proximal weight must be nonnegative")
    if spec.family == PROX_LINEAR and np.any(arr == 0.0):
        raise ValueError("prox_linear needs a strictly positive weight")
    return lam


@dataclasses.dataclass(frozen=True, eq=False)
class SurrogateInstance:
    """A built majorizer: callables plus the data its closed forms need."""

    family: str
    anchor: Point
    lam: Union[float, np.ndarray]
    value: Callable
    rgrad: Callable
    f_anchor: float
    grad_anchor: Optional[np.ndarray] = None
    target: Optional[np.ndarray] = None


def build_surrogate(
    spec: SurrogateSpec,
    marginal_value: Callable,
    marginal_egrad: Callable,
    anchor: Point,
    lam: Union[float, np.ndarray, None] = None,
) -> SurrogateInstance:
    """Construct the majorizer of a block marginal at an anchor point.

    ``marginal_value``/``marginal_egrad`` evaluate the frozen-other-blocks
    objective and its Euclidean gradient at a Point of this block.  ``lam``
    overrides the spec weight (the driver passes the resolved per-cycle
    value); plain numeric spec weights are picked up automatically.
    """
    if lam is None:
        if callable(spec.lam):
            raise ValueError(
                "spec has a scheduled weight; pass the resolved lam"
            )
        lam = spec.lam
    kind = anchor.manifold
    family = spec.family

    if family == IDENTITY:
        return SurrogateInstance(
            family=family,
            anchor=anchor,
            lam=0.0,
            value=marginal_value,
            rgrad=lambda p: egrad_to_rgrad(p, marginal_egrad(p)),
            f_anchor=float(marginal_value(anchor)),
        )

    if family == RIEMANNIAN_PROXIMAL:
        if isinstance(kind, (Stiefel, FixedRank)):
            raise UnsupportedFamily(
                "riemannian_proximal needs a geodesic distance; "
                f"{type(kind).__name__} has none"
            )
        lam_f = float(lam)

        def rp_value(p: Point) -> float:
            return marginal_value(p) + 0.5 * lam_f * dist(p, anchor) ** 2

        def rp_rgrad(p: Point) -> TangentVector:
            g = egrad_to_rgrad(p, marginal_egrad(p))
            pull = log_map(p, anchor)
            return TangentVector(p, g.data - lam_f * pull.data)

        return SurrogateInstance(
            family=family,
            anchor=anchor,
            lam=lam_f,
            value=rp_value,
            rgrad=rp_rgrad,
            f_anchor=float(marginal_value(anchor)),
        )

    if family == EUCLIDEAN_PROXIMAL:
        lam_f = float(lam)
        a = anchor.data

        def ep_value(p: Point) -> float:
            diff = p.data - a
            return marginal_value(p) + 0.5 * lam_f * float(np.sum(diff * diff))

        def ep_rgrad(p: Point) -> TangentVector:
            # combine Euclidean gradients before converting, so the metric
            # rescaling on SPD blocks applies to the penalty term too
            return egrad_to_rgrad(p, marginal_egrad(p) + lam_f * (p.data - a))

        return SurrogateInstance(
            family=family,
            anchor=anchor,
            lam=lam_f,
            value=ep_value,
            rgrad=ep_rgrad,
            f_anchor=float(marginal_value(anchor)),
        )

    if family == PROX_LINEAR:
        g_a = np.asarray(marginal_egrad(anchor), dtype=float)
        f_a = float(marginal_value(anchor))
        a = anchor.data
        w = lam  # scalar or per-entry array

        def pl_value(p: Point) -> float:
            diff = p.data - a
            return (
                f_a
                + float(np.sum(g_a * diff))
                + 0.5 * float(np.sum(w * diff * diff))
            )

        def pl_rgrad(p: Point) -> TangentVector:
            return egrad_to_rgrad(p, g_a + w * (p.data - a))

        return SurrogateInstance(
            family=family,
            anchor=anchor,
            lam=w,
            value=pl_value,
            rgrad=pl_rgrad,
            f_anchor=f_a,
            grad_anchor=g_a,
        )

    if family == REGULARIZED_LINEAR_STIEFEL:
        if not isinstance(kind, Stiefel):
            raise UnsupportedFamily(
                "regularized_linear_stiefel is defined on Stiefel blocks only"
            )
        lam_f = float(lam)
        if spec.r_map is not None:
            r_a = np.asarray(spec.r_map(anchor.data), dtype=float)
        else:
            r_a = -0.5 * np.asarray(marginal_egrad(anchor), dtype=float)
        f_a = float(marginal_value(anchor))
        a = anchor.data

        def rl_value(p: Point) -> float:
            diff = p.data - a
            return (
                f_a
                - 2.0 * float(np.sum(r_a * diff))
                + lam_f * float(np.sum(diff * diff))
            )

        def rl_rgrad(p: Point) -> TangentVector:
            return proj_tangent(p, -2.0 * r_a + 2.0 * lam_f * (p.data - a))

        return SurrogateInstance(
            family=family,
            anchor=anchor,
            lam=lam_f,
            value=rl_value,
            rgrad=rl_rgrad,
            f_anchor=f_a,
            grad_anchor=-2.0 * r_a,
            target=r_a + lam_f * a,
        )

    raise UnsupportedFamily(f"unknown surrogate family {family!r}")


# ---------------------------------------------------------------------------
# Armijo line search


def armijo_step(
    g_value: Callable,
    g_rgrad: Callable,
    x: Point,
    direction: TangentVector,
    sigma: float = ARMIJO_SIGMA,
    beta: float = ARMIJO_BETA,
) -> float:
    """Largest beta^j, j >= 0, satisfying the sufficient-decrease test
    g(retract(x, beta^j d)) <= g(x) + sigma beta^j <grad g(x), d>."""
    if not (0.0 < sigma < 1.0 and 0.0 < beta < 1.0):
        raise ValueError("sigma and beta must lie in (0, 1)")
    if not np.any(direction.data):
        return 1.0
    slope = inner(x, g_rgrad(x), direction)
    if slope > 0.0:
        raise LineSearchFailure("search direction is not a descent direction")
    g0 = g_value(x)
    for j in range(MAX_BACKTRACKS + 1):
        step = beta**j
        try:
            g_cand = g_value(retract(x, TangentVector(x, step * direction.data)))
        except (GeometryError, la.LinAlgError):
            # overflowing trial steps are rejections, not failures
            continue
        if g_cand <= g0 + sigma * step * slope:
            return step
    raise LineSearchFailure(
        f"no acceptable step after {MAX_BACKTRACKS} halvings"
    )


# ---------------------------------------------------------------------------
# Block minimization


@dataclasses.dataclass(frozen=True, eq=False)
class BlockResult:
    point: Point
    delta_bound: float
    certified: bool
    residual: float
    iterations: int


def _ball_project_flat(constraint, target: np.ndarray) -> np.ndarray:
    c = constraint.center.data
    d = la.norm(target - c)
    if d <= constraint.radius:
        return target
    return c + (target - c) * (constraint.radius / d)


def _closed_form(
    surrogate: SurrogateInstance, constraint: Constraint
) -> Optional[Point]:
    kind = surrogate.anchor.manifold
    if surrogate.family == PROX_LINEAR:
        target = surrogate.anchor.data - surrogate.grad_anchor / surrogate.lam
        if isinstance(kind, Euclidean):
            if isinstance(constraint, WholeManifold):
                return Point(kind, target)
            if isinstance(constraint, (EuclideanBall, GeodesicBall)):
                # both balls coincide on flat blocks; radial projection is
                # exact only for a uniform weight
                if np.isscalar(surrogate.lam) or satisfies_constraint(
                    constraint, Point(kind, target), slack=0.0
                ):
                    return Point(kind, _ball_project_flat(constraint, target))
                return None
        elif isinstance(constraint, WholeManifold) and isinstance(
            kind, (Sphere, Stiefel, FixedRank)
        ):
            return proj_manifold(kind, target)
        return None
    if surrogate.family == REGULARIZED_LINEAR_STIEFEL:
        if not isinstance(constraint, WholeManifold):
            raise UnsupportedFamily(
                "regularized_linear_stiefel supports whole-manifold blocks only"
            )
        return proj_manifold(kind, surrogate.target)
    return None


def _certifiable(family: str, kind) -> bool:
    # strong convexity of the surrogate transfers to a suboptimality bound
    # only where the penalty is the squared metric distance of the block
    if family == RIEMANNIAN_PROXIMAL:
        return isinstance(kind, (Euclidean, SPD))
    if family in (EUCLIDEAN_PROXIMAL, PROX_LINEAR):
        return isinstance(kind, Euclidean)
    return False


def _diameter_estimate(
    constraint: Constraint, x: Point, anchor: Point
) -> float:
    if isinstance(constraint, (EuclideanBall, GeodesicBall)):
        return 2.0 * constraint.radius
    kind = x.manifold
    if isinstance(kind, Sphere):
        return math.pi
    if isinstance(kind, Stiefel):
        return 2.0 * math.sqrt(kind.k)
    return 2.0 * max(1.0, dist(x, anchor))


def minimize_block(
    surrogate: SurrogateInstance,
    constraint: Constraint,
    budget: Optional[int] = None,
    tol: Optional[float] = None,
    strong_margin: Optional[float] = None,
) -> BlockResult:
    """Minimize a built surrogate over the block constraint.

    Closed forms are used where available (delta 0, certified).  Otherwise
    monotone projected Riemannian descent runs until the feasible-cone
    gradient residual drops below ``tol`` or the budget is spent; the
    returned ``delta_bound`` is residual^2 / (2 * strong_margin) when a
    positive strong-convexity margin applies, else an uncertified
    residual * diameter estimate.
    """
    budget = 200 if budget is None else budget
    tol = 1e-9 if tol is None else tol

    exact = _closed_form(surrogate, constraint)
    if exact is not None:
        return BlockResult(exact, 0.0, True, 0.0, 0)

    x = surrogate.anchor
    g_here = surrogate.value(x)
    resid = math.inf
    iters = 0
    for _ in range(budget):
        rg = surrogate.rgrad(x)
        v = cone_project_descent(constraint, x, TangentVector(x, -rg.data))
        resid = norm(x, v)
        if resid <= tol:
            break
        slope = inner(x, rg, v)
        accepted = False
        for j in range(MAX_BACKTRACKS + 1):
            step = ARMIJO_BETA**j
            try:
                cand = retract(x, TangentVector(x, step * v.data))
                cand = project_into(constraint, cand)
                g_cand = surrogate.value(cand)
            except (GeometryError, la.LinAlgError):
                # a wildly long trial step can overflow the retraction into
                # something no longer on the manifold; that is a rejection,
                # not a solver failure
                continue
            if g_cand <= g_here + ARMIJO_SIGMA * step * slope:
                x, g_here = cand, g_cand
                accepted = True
                break
        if not accepted:
            # sufficient decrease is below the floating-point resolution of
            # the surrogate value; return the best iterate with an honest
            # residual rather than pretending tol was met
            break
        iters += 1
    else:
        # budget exhausted; recompute the residual at the final iterate
        rg = surrogate.rgrad(x)
        v = cone_project_descent(constraint, x, TangentVector(x, -rg.data))
        resid = norm(x, v)

    if (
        strong_margin is not None
        and strong_margin > 0.0
        and _certifiable(surrogate.family, x.manifold)
    ):
        return BlockResult(
            x, resid**2 / (2.0 * strong_margin), True, resid, iters
        )
    delta = resid * _diameter_estimate(constraint, x, surrogate.anchor)
    return BlockResult(x, delta, False, resid, iters)


# ---------------------------------------------------------------------------
# Majorization checking


@dataclasses.dataclass(frozen=True)
class MajorizationReport:
    family: str
    samples: int
    max_violation: float  # max of f - g over the samples (<= tol passes)
    anchor_gap: float  # |g(anchor) - f(anchor)|
    growth_min: float  # min of (g - f) / d^phi_power
    growth_level: float  # the c it is compared against
    majorizes: bool
    sharp_at_anchor: bool
    growth_ok: bool


def check_majorization(
    surrogate: SurrogateInstance,
    marginal_value: Callable,
    anchor: Point,
    constraint: Constraint = WholeManifold(),
    samples: int = 100,
    c: float = 0.0,
    phi_power: float = 2.0,
    seed: int = 0,
    radius: float = 1.0,
    tol: float = 1e-10,
) -> MajorizationReport:
    """Sample feasible points around the anchor and compare surrogate vs
    objective: domination, sharpness at the anchor, and the growth ratio
    (g - f) / d(theta, anchor)^phi_power against the level c."""
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    f_a = float(marginal_value(anchor))
    anchor_gap = abs(float(surrogate.value(anchor)) - f_a)

    max_violation = -math.inf
    growth_min = math.inf
    used = 0
    while used < samples:
        scale = rng.uniform(0.0, radius)
        if scale <= 1e-12:
            continue
        v = random_tangent(anchor, rng, scale=scale)
        p = project_into(constraint, retract(anchor, v))
        d = dist(p, anchor)
        if d <= 1e-12:
            continue
        gap = float(surrogate.value(p)) - float(marginal_value(p))
        max_violation = max(max_violation, -gap)
        growth_min = min(growth_min, gap / d**phi_power)
        used += 1

    return MajorizationReport(
        family=surrogate.family,
        samples=used,
        max_violation=max_violation,
        anchor_gap=anchor_gap,
        growth_min=growth_min,
        growth_level=c,
        majorizes=max_violation <= tol,
        sharp_at_anchor=anchor_gap <= tol,
        growth_ok=growth_min >= c - 1e-9,
    )
