"""Robust PCA with a hard rank constraint and smoothed sparsity.

Splits an observed matrix M into a rank-r part L and a sparse part S by
minimizing

    F(L, S) = g_sigma(S) + (1/(2 mu)) ||M - L - S||_F^2,

where g_sigma is the entrywise smoothed l1 penalty (quadratic of slope 1/sigma
inside |s| <= sigma*lambda, linear of slope lambda outside).  Both proximal
block updates are closed forms: L by a truncated SVD of a convex combination,
S by an entrywise shrinkage.
"""

from __future__ import annotations

import math

import numpy as np
import numpy.linalg as la

from ..driver import BlockProblem, RunResult, SolverConfig
from ..geometry import Euclidean, FixedRank, Point, ProductPoint, proj_manifold
from ..surrogates import EUCLIDEAN_PROXIMAL, SurrogateSpec, WholeManifold
from . import RunSetup


def generate(
    rows: int = 50,
    cols: int = 50,
    rank: int = 2,
    corruption: float = 0.05,
    seed: int = 0,
) -> tuple:
    """Rank-r Gaussian product plus unit-magnitude spikes on a random
    support covering `corruption` of the entries."""
    rng = np.random.default_rng(seed)
    low = rng.standard_normal((rows, rank)) @ rng.standard_normal((cols, rank)).T
    low /= math.sqrt(rank)
    spikes = np.zeros((rows, cols))
    count = int(round(corruption * rows * cols))
    flat = rng.choice(rows * cols, size=count, replace=False)
    spikes.ravel()[flat] = rng.choice([-1.0, 1.0], size=count)
    return low + spikes, low, spikes


def g_sigma(s: np.ndarray, lam: float, sigma: float) -> float:
    a = np.abs(s)
    inner = a <= sigma * lam
    vals = np.where(inner, a * a / (2.0 * sigma), lam * a - sigma * lam * lam / 2.0)
    return float(np.sum(vals))


def z_sigma(s: np.ndarray, lam: float, sigma: float) -> np.ndarray:
    return np.clip(s / sigma, -lam, lam)


def objective(
    m: np.ndarray, l: np.ndarray, s: np.ndarray, lam: float, mu: float, sigma: float
) -> float:
    resid = m - l - s
    return g_sigma(s, lam, sigma) + float(np.sum(resid * resid)) / (2.0 * mu)


def l_update(
    m: np.ndarray,
    s: np.ndarray,
    l_prev: np.ndarray,
    rank: int,
    mu: float,
    weight: float,
) -> np.ndarray:
    """Rank-r projection of the convex combination of the residual target
    and the previous iterate; global minimizer of the L surrogate by the
    low-rank approximation theorem."""
    c = (m - s + mu * weight * l_prev) / (1.0 + mu * weight)
    kind = FixedRank(m.shape[0], m.shape[1], rank)
    return proj_manifold(kind, c).data


def s_update(
    m: np.ndarray,
    l: np.ndarray,
    s_prev: np.ndarray,
    lam: float,
    mu: float,
    sigma: float,
    weight: float,
) -> np.ndarray:
    """Entrywise proximal step of the smoothed penalty: shrink the combined
    quadratic center c by mu_tilde * clip(c / (sigma + mu_tilde))."""
    c = (m - l + mu * weight * s_prev) / (1.0 + mu * weight)
    mu_t = mu / (1.0 + mu * weight)
    return c - mu_t * np.clip(c / (sigma + mu_t), -lam, lam)


def build_problem(
    m: np.ndarray, rank: int, lam: float, mu: float, sigma: float
) -> BlockProblem:
    rows, cols = m.shape
    l_kind = FixedRank(rows, cols, rank)
    s_kind = Euclidean(rows, cols)

    def value(state) -> float:
        return objective(m, state[0].data, state[1].data, lam, mu, sigma)

    def egrad_block(state, i: int) -> np.ndarray:
        resid = m - state[0].data - state[1].data
        if i == 0:
            return -resid / mu
        return z_sigma(state[1].data, lam, sigma) - resid / mu

    return BlockProblem(
        manifolds=(l_kind, s_kind),
        constraints=(WholeManifold(), WholeManifold()),
        value=value,
        egrad_block=egrad_block,
        smoothness_bound=(1.0 / mu, 1.0 / sigma + 1.0 / mu),
        lower_bound=0.0,
    )


def exact_solvers(m: np.ndarray, rank: int, lam: float, mu: float, sigma: float):
    def solve_l(state, i, anchor: Point, weight: float) -> Point:
        new = l_update(m, state[1].data, anchor.data, rank, mu, weight)
        return Point(anchor.manifold, new)

    def solve_s(state, i, anchor: Point, weight: float) -> Point:
        new = s_update(m, state[0].data, anchor.data, lam, mu, sigma, weight)
        return Point(anchor.manifold, new)

    return solve_l, solve_s


def initial_state(m: np.ndarray, rank: int) -> ProductPoint:
    rows, cols = m.shape
    l_kind = FixedRank(rows, cols, rank)
    s_kind = Euclidean(rows, cols)
    return ProductPoint(
        (proj_manifold(l_kind, m), Point(s_kind, np.zeros((rows, cols))))
    )


def from_config(params: dict) -> RunSetup:
    rows = int(params.get("rows", 50))
    cols = int(params.get("cols", 50))
    rank = int(params.get("rank", 2))
    corruption = float(params.get("corruption", 0.05))
    seed = int(params.get("seed", 0))
    mu = float(params.get("mu", 0.1))
    sigma = float(params.get("sigma", 1e-2))
    lam = float(params.get("lam", 1.0 / math.sqrt(max(rows, cols))))
    weight = float(params.get("prox_weight", 0.1))
    stop_tol = params.get("stop_tol")

    m, low, spikes = generate(rows, cols, rank, corruption, seed)
    problem = build_problem(m, rank, lam, mu, sigma)
    spec = SurrogateSpec(EUCLIDEAN_PROXIMAL, lam=weight)
    config = SolverConfig(
        max_cycles=int(params.get("max_cycles", 500)),
        surrogate_specs=(spec, spec),
        seed=seed,
        stationarity_every=int(params.get("stationarity_every", 1)),
        stop_tol=None if stop_tol is None else float(stop_tol),
        exact_solvers=exact_solvers(m, rank, lam, mu, sigma),
    )
    init = initial_state(m, rank)

    def metric(result: RunResult) -> float:
        err = la.norm((result.final[0].data - low).ravel())
        return float(err / la.norm(low.ravel()))

    return RunSetup(
        name="rpca",
        problem=problem,
        config=config,
        init=init,
        final_metric=metric,
        metric_name="relative_l_error",
        params={
            "rows": rows,
            "cols": cols,
            "rank": rank,
            "corruption": corruption,
            "mu": mu,
            "sigma": sigma,
            "lam": lam,
            "prox_weight": weight,
        },
    )
