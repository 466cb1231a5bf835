"""CP tensor factorization with per-block manifold constraints.

The order-m tensor X is approximated by R rank-one terms; block i is the
factor matrix U^(i) of shape I_i x R.  The block marginal is the matricized
least-squares objective

    || unfold(X, i) - U^(i) B_i^T ||_F^2,

where B_i is the Khatri-Rao product of the other factors in ascending mode
order, matching row-major unfolding.  Euclidean blocks get an exact ridge
update; a Stiefel or fixed-rank first block gets the projected gradient
step with a curvature-matched weight.
"""

from __future__ import annotations

import functools

import numpy as np
import numpy.linalg as la
from scipy.linalg import khatri_rao

from ..driver import BlockProblem, RunResult, SolverConfig
from ..geometry import DegenerateInput, Euclidean, FixedRank, Point, ProductPoint, Stiefel, proj_manifold
from ..surrogates import (
    EUCLIDEAN_PROXIMAL,
    IDENTITY,
    PROX_LINEAR,
    SurrogateSpec,
    WholeManifold,
)
from . import RunSetup

RIDGE_COND_LIMIT = 1e12


def generate(
    shape=(30, 20, 10),
    rank: int = 3,
    seed: int = 0,
    first_orthonormal: bool = False,
) -> tuple:
    """Exact rank-R tensor from seeded Gaussian factors; the first factor
    can be drawn orthonormal so a Stiefel-constrained fit is well posed."""
    rng = np.random.default_rng(seed)
    factors = [rng.standard_normal((dim, rank)) for dim in shape]
    if first_orthonormal:
        factors[0] = proj_manifold(Stiefel(shape[0], rank), factors[0]).data
    return reconstruct(factors), factors


def reconstruct(factors) -> np.ndarray:
    shape = tuple(u.shape[0] for u in factors)
    rank = factors[0].shape[1]
    out = np.zeros(shape)
    for r in range(rank):
        term = factors[0][:, r]
        for u in factors[1:]:
            term = np.multiply.outer(term, u[:, r])
        out += term
    return out


def unfold(tensor: np.ndarray, mode: int) -> np.ndarray:
    return np.moveaxis(tensor, mode, 0).reshape(tensor.shape[mode], -1)


def khatri_b(factors, mode: int) -> np.ndarray:
    """Khatri-Rao product of every factor except `mode`, ascending, so that
    unfold(X, mode) = U^(mode) B^T for an exact decomposition."""
    others = [factors[i] for i in range(len(factors)) if i != mode]
    return functools.reduce(khatri_rao, others)


def marginal_value(x_unf: np.ndarray, u: np.ndarray, b: np.ndarray) -> float:
    resid = x_unf - u @ b.T
    return float(np.sum(resid * resid))


def marginal_egrad(x_unf: np.ndarray, u: np.ndarray, b: np.ndarray) -> np.ndarray:
    return -2.0 * (x_unf - u @ b.T) @ b


def ridge_update(
    x_unf: np.ndarray, b: np.ndarray, anchor: np.ndarray, weight: float
) -> np.ndarray:
    """argmin of ||X - U B^T||^2 + weight ||U - anchor||^2; weight 0 is the
    plain least-squares step and requires B well conditioned."""
    rank = b.shape[1]
    gram = b.T @ b + weight * np.eye(rank)
    if weight == 0.0 and (
        not np.all(np.isfinite(gram)) or la.cond(gram) > RIDGE_COND_LIMIT
    ):
        raise DegenerateInput("factor Gram matrix is numerically singular")
    rhs = x_unf @ b + weight * anchor
    return la.solve(gram.T, rhs.T).T


def build_problem(tensor: np.ndarray, rank: int, first_block: str = "euclidean") -> BlockProblem:
    shape = tensor.shape
    m = len(shape)
    unfolded = [unfold(tensor, i) for i in range(m)]

    kinds = []
    for i, dim in enumerate(shape):
        if i == 0 and first_block == "stiefel":
            kinds.append(Stiefel(dim, rank))
        elif i == 0 and first_block == "fixedrank":
            kinds.append(FixedRank(dim, rank, rank))
        else:
            kinds.append(Euclidean(dim, rank))

    def factors_of(state):
        return [state[i].data for i in range(m)]

    def value(state) -> float:
        fs = factors_of(state)
        return marginal_value(unfolded[0], fs[0], khatri_b(fs, 0))

    def egrad_block(state, i: int) -> np.ndarray:
        fs = factors_of(state)
        return marginal_egrad(unfolded[i], fs[i], khatri_b(fs, i))

    return BlockProblem(
        manifolds=tuple(kinds),
        constraints=tuple(WholeManifold() for _ in range(m)),
        value=value,
        egrad_block=egrad_block,
        lower_bound=0.0,
    )


def geometric_schedule(base: float, decay: float):
    """Per-cycle proximal weight base * decay^n, fed to the family as
    2 * lam_n because the family penalty carries a half."""

    def lam(cycle: int, state, block: int) -> float:
        return 2.0 * base * decay**cycle

    return lam


def curvature_weight(tensor: np.ndarray, extra: float):
    """Projected-step weight for a manifold first block: twice the spectral
    norm of B^T B bounds the marginal curvature, so the linearized model
    with this weight majorizes."""

    def lam(cycle: int, state, block: int) -> float:
        fs = [state[i].data for i in range(len(state))]
        b = khatri_b(fs, block)
        return 2.0 * float(la.norm(b.T @ b, 2)) + extra

    return lam


def exact_ridge_solver(tensor: np.ndarray):
    unfolded = [unfold(tensor, i) for i in range(tensor.ndim)]

    def solve(state, i: int, anchor: Point, lam: float) -> Point:
        fs = [state[j].data for j in range(len(state))]
        b = khatri_b(fs, i)
        new = ridge_update(unfolded[i], b, anchor.data, 0.5 * lam)
        return Point(anchor.manifold, new)

    return solve


def initial_factors(shape, rank: int, seed: int, first_block: str = "euclidean") -> ProductPoint:
    rng = np.random.default_rng(seed)
    points = []
    for i, dim in enumerate(shape):
        raw = rng.standard_normal((dim, rank))
        if i == 0 and first_block == "stiefel":
            points.append(proj_manifold(Stiefel(dim, rank), raw))
        elif i == 0 and first_block == "fixedrank":
            points.append(proj_manifold(FixedRank(dim, rank, rank), raw))
        else:
            points.append(Point(Euclidean(dim, rank), raw))
    return ProductPoint(tuple(points))


def relative_error(tensor: np.ndarray, state) -> float:
    est = reconstruct([state[i].data for i in range(len(state))])
    return float(la.norm((tensor - est).ravel()) / la.norm(tensor.ravel()))


def from_config(params: dict) -> RunSetup:
    shape = params.get("shape", (30, 20, 10))
    if isinstance(shape, str):
        shape = tuple(int(s) for s in shape.replace("x", ",").split(",") if s)
    shape = tuple(int(s) for s in shape)
    rank = int(params.get("rank", 3))
    seed = int(params.get("seed", 0))
    variant = str(params.get("variant", "euclidean"))
    base = float(params.get("lam_base", 0.1))
    decay = float(params.get("lam_decay", 0.5))
    stop_tol = params.get("stop_tol")

    first_block = "euclidean"
    if variant in ("stiefel_first", "fixedrank_first"):
        first_block = variant.split("_")[0]
    tensor, truth = generate(shape, rank, seed, first_orthonormal=first_block == "stiefel")
    m = len(shape)
    problem = build_problem(tensor, rank, first_block)

    specs = []
    solvers = []
    for i in range(m):
        if variant == "als":
            specs.append(SurrogateSpec(IDENTITY, lam=0.0))
            solvers.append(_als_solver(tensor))
        elif i == 0 and first_block != "euclidean":
            specs.append(
                SurrogateSpec(PROX_LINEAR, lam=curvature_weight(tensor, 2.0 * base))
            )
            solvers.append(None)
        else:
            specs.append(
                SurrogateSpec(EUCLIDEAN_PROXIMAL, lam=geometric_schedule(base, decay))
            )
            solvers.append(exact_ridge_solver(tensor))

    config = SolverConfig(
        max_cycles=int(params.get("max_cycles", 500)),
        surrogate_specs=tuple(specs),
        seed=seed,
        stationarity_every=int(params.get("stationarity_every", 1)),
        stop_tol=None if stop_tol is None else float(stop_tol),
        exact_solvers=tuple(solvers),
    )
    init = initial_factors(shape, rank, seed + 1, first_block)

    def metric(result: RunResult) -> float:
        return relative_error(tensor, result.final)

    return RunSetup(
        name="cp-dictionary",
        problem=problem,
        config=config,
        init=init,
        final_metric=metric,
        metric_name="relative_error",
        params={
            "shape": list(shape),
            "rank": rank,
            "variant": variant,
            "lam_base": base,
            "lam_decay": decay,
        },
    )


def _als_solver(tensor: np.ndarray):
    unfolded = [unfold(tensor, i) for i in range(tensor.ndim)]

    def solve(state, i: int, anchor: Point, lam: float) -> Point:
        fs = [state[j].data for j in range(len(state))]
        b = khatri_b(fs, i)
        return Point(anchor.manifold, ridge_update(unfolded[i], b, anchor.data, 0.0))

    return solve
