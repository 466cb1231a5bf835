"""Optimistic Gaussian likelihood over uncertainty balls.

Estimates the most favorable Gaussian within balls around the empirical
moments: the mean ranges over a Euclidean ball of radius rho1 centered at
mu_hat and the covariance over a geodesic ball of radius rho2 centered at
Sigma_hat in the curved SPD metric,

    f(mu, Sigma) = tr(Sigma^{-1} S(mu)) + log det Sigma,
    S(mu) = (1/M) sum_m (x_m - mu)(x_m - mu)^T
          = Sigma_hat + (mu_hat - mu)(mu_hat - mu)^T.

Both blocks carry proximal surrogates with a shared weight lam.  The mean
update has a closed form (a regularized linear solve that always lands
strictly inside its ball); the covariance update is solved iteratively.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import numpy.linalg as la

from ..driver import BlockProblem, RunResult, SolverConfig
from ..geometry import SPD, Euclidean, Point, ProductPoint, exp_map, random_tangent
from ..surrogates import (
    RIEMANNIAN_PROXIMAL,
    EuclideanBall,
    GeodesicBall,
    SurrogateSpec,
)
from . import RunSetup


@dataclasses.dataclass(frozen=True, eq=False)
class MomentData:
    samples: np.ndarray  # (N, M)
    mean: np.ndarray  # (N, 1) empirical mean
    cov: np.ndarray  # (N, N) empirical covariance, SPD required
    rho1: float
    rho2: float

    @property
    def dim(self) -> int:
        return self.samples.shape[0]


def generate(dim: int = 10, count: int = 40, seed: int = 0) -> np.ndarray:
    """Seeded Gaussian draws with a random well-conditioned covariance."""
    if count <= dim:
        raise ValueError("need more samples than dimensions for an SPD covariance")
    rng = np.random.default_rng(seed)
    mu = rng.standard_normal((dim, 1))
    a = rng.standard_normal((dim, dim))
    root = a / math.sqrt(dim) + 0.8 * np.eye(dim)
    return mu + root @ rng.standard_normal((dim, count))


def empirical(samples: np.ndarray, rho1=None, rho2: float = 1.0) -> MomentData:
    """Empirical moments plus ball radii; rho1 defaults to the largest
    sample deviation, which caps the scatter spectrum at 4*rho1^2."""
    x = np.asarray(samples, dtype=float)
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    cov = (centered @ centered.T) / x.shape[1]
    floor = float(la.eigvalsh(cov)[0])
    if floor <= 0.0:
        raise ValueError("empirical covariance is not positive definite")
    if rho1 is None:
        rho1 = float(np.max(la.norm(centered, axis=0)))
    if rho1 <= 0.0 or rho2 <= 0.0:
        raise ValueError("ball radii must be positive")
    return MomentData(x, mean, cov, float(rho1), float(rho2))


def scatter(data: MomentData, mu: np.ndarray) -> np.ndarray:
    shift = data.mean - mu
    return data.cov + shift @ shift.T


def value(data: MomentData, mu: np.ndarray, sigma: np.ndarray) -> float:
    sign, logdet = la.slogdet(sigma)
    if sign <= 0:
        raise ValueError("covariance iterate lost positive definiteness")
    return float(np.trace(la.solve(sigma, scatter(data, mu)))) + float(logdet)


def egrad_mu(data: MomentData, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    return 2.0 * la.solve(sigma, mu - data.mean)


def egrad_sigma(data: MomentData, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    inv = la.inv(sigma)
    inv = 0.5 * (inv + inv.T)
    g = inv - inv @ scatter(data, mu) @ inv
    return 0.5 * (g + g.T)


def smoothness_bounds(data: MomentData) -> tuple:
    """Marginal gradient Lipschitz bounds over the balls, from the
    eigenvalue sandwich lam_min(cov) e^{-sqrt2 rho2} <= Sigma <=
    lam_max(cov) e^{sqrt2 rho2} and the scatter cap
    lam_max(S) <= min{4 rho1^2, lam_max(cov) + rho1^2}."""
    eigs = la.eigvalsh(data.cov)
    blowup = math.exp(math.sqrt(2.0) * data.rho2)
    scatter_cap = min(4.0 * data.rho1**2, float(eigs[-1]) + data.rho1**2)
    l_mu = 2.0 * blowup / float(eigs[0])
    l_sigma = 2.0 * scatter_cap * blowup / float(eigs[0])
    return l_mu, l_sigma


def build_problem(data: MomentData) -> BlockProblem:
    n = data.dim
    mu_kind = Euclidean(n, 1)
    sig_kind = SPD(n)

    def val(state) -> float:
        return value(data, state[0].data, state[1].data)

    def egrad_block(state, i: int) -> np.ndarray:
        if i == 0:
            return egrad_mu(data, state[0].data, state[1].data)
        return egrad_sigma(data, state[0].data, state[1].data)

    return BlockProblem(
        manifolds=(mu_kind, sig_kind),
        constraints=(
            EuclideanBall(Point(mu_kind, data.mean), data.rho1),
            GeodesicBall(Point(sig_kind, data.cov), data.rho2),
        ),
        value=val,
        egrad_block=egrad_block,
        smoothness_bound=smoothness_bounds(data),
        lower_bound=None,
    )


def mu_exact_solver(data: MomentData):
    """Minimizer of the mean surrogate: (2 Sigma^{-1} + lam I) mu =
    2 Sigma^{-1} mu_hat + lam mu_prev.  The solution contracts toward the
    ball center, so it is always strictly feasible and the gap is zero."""

    def solve(state, i, anchor: Point, lam: float) -> Point:
        sigma = state[1].data
        inv = la.inv(sigma)
        inv = 0.5 * (inv + inv.T)
        n = data.dim
        lhs = 2.0 * inv + lam * np.eye(n)
        rhs = 2.0 * (inv @ data.mean) + lam * anchor.data
        return Point(anchor.manifold, la.solve(lhs, rhs))

    return solve


def initial_state(data: MomentData, seed: int, offset: float = 0.5) -> ProductPoint:
    """Start at a fraction `offset` of each ball radius from the center,
    in a seeded random direction."""
    rng = np.random.default_rng(seed)
    n = data.dim
    mu_kind = Euclidean(n, 1)
    sig_kind = SPD(n)
    direction = rng.standard_normal((n, 1))
    direction /= la.norm(direction)
    mu0 = Point(mu_kind, data.mean + offset * data.rho1 * direction)
    center = Point(sig_kind, data.cov)
    eta = random_tangent(center, rng, scale=offset * data.rho2)
    sigma0 = exp_map(center, eta.data)
    return ProductPoint((mu0, sigma0))


def relative_improvement(result: RunResult) -> float:
    if len(result.trace) < 2:
        return math.inf
    prev = result.trace[-2].objective
    last = result.trace[-1].objective
    return abs(last - prev) / max(abs(last), np.finfo(float).tiny)


def from_config(params: dict) -> RunSetup:
    dim = int(params.get("dim", 10))
    count = int(params.get("count", 40))
    seed = int(params.get("seed", 0))
    lam = float(params.get("lam", 0.1))
    rho2 = float(params.get("rho2", 1.0))
    rho1 = params.get("rho1")
    offset = float(params.get("init_offset", 0.5))
    stop_tol = params.get("stop_tol")

    data = empirical(
        generate(dim, count, seed),
        rho1=None if rho1 is None else float(rho1),
        rho2=rho2,
    )
    problem = build_problem(data)
    spec = SurrogateSpec(
        RIEMANNIAN_PROXIMAL,
        lam=lam,
        inner_budget=int(params.get("inner_budget", 200)),
        inner_tol=float(params.get("inner_tol", 1e-10)),
    )
    config = SolverConfig(
        max_cycles=int(params.get("max_cycles", 1000)),
        surrogate_specs=(spec, spec),
        seed=seed,
        stationarity_every=int(params.get("stationarity_every", 1)),
        stop_tol=None if stop_tol is None else float(stop_tol),
        exact_solvers=(mu_exact_solver(data), None),
    )
    init = initial_state(data, seed + 1, offset)
    return RunSetup(
        name="optimistic-likelihood",
        problem=problem,
        config=config,
        init=init,
        final_metric=relative_improvement,
        metric_name="final_rel_improvement",
        params={
            "dim": dim,
            "count": count,
            "lam": lam,
            "rho1": data.rho1,
            "rho2": rho2,
            "init_offset": offset,
        },
    )
