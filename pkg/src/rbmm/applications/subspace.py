"""Tracking a subspace that drifts along a Grassmannian geodesic.

The truth is U(t) = H cos(Theta t) + Y sin(Theta t) with [H Y] an
orthonormal d x 2k frame and Theta a diagonal matrix of principal-angle
rates; snapshot i observes X_i = U(t_i) G_i + N_i.  Estimation couples an
orthonormal frame block Q = [H Y] on Stiefel(d, 2k) with a rate block
theta in R^k through

    f(Q, theta) = - sum_i || X_i^T U(t_i; Q, theta) ||_F^2.

Both block updates are closed forms: the frame step is a polar projection
of lam_q * Q - grad_Q f, and each rate updates by a weighted gradient step
whose weight is the per-coordinate curvature bound of the separable form

    f(theta_j) = - sum_i ( r_ij cos(2 theta_j t_i - phi_ij) + b_ij ).
"""

from __future__ import annotations

import dataclasses

import numpy as np
import numpy.linalg as la

from ..driver import BlockProblem, RunResult, SolverConfig
from ..geometry import Euclidean, Point, ProductPoint, Stiefel, proj_manifold
from ..surrogates import (
    PROX_LINEAR,
    REGULARIZED_LINEAR_STIEFEL,
    SurrogateSpec,
    WholeManifold,
)
from . import RunSetup


@dataclasses.dataclass(frozen=True, eq=False)
class GeodesicModel:
    origin: np.ndarray  # H: the subspace basis at t = 0, d x k
    direction: np.ndarray  # Y: orthonormal complement direction, d x k
    rates: np.ndarray  # principal-angle rates, length k
    times: np.ndarray  # snapshot times in [0, 1]

    def frame(self, t: float) -> np.ndarray:
        c = np.cos(self.rates * t)
        s = np.sin(self.rates * t)
        return self.origin * c + self.direction * s

    def stacked(self) -> np.ndarray:
        return np.hstack([self.origin, self.direction])


def generate(
    d: int,
    k: int,
    snapshots: int,
    samples: int,
    noise_std: float,
    seed: int,
) -> tuple:
    """Seeded data: frame basis, rates, then per-snapshot coefficients and
    noise, drawn in that fixed order."""
    if 2 * k > d:
        raise ValueError("need 2k <= d for an orthonormal [H Y] frame")
    if snapshots < 1:
        raise ValueError("need at least one snapshot")
    rng = np.random.default_rng(seed)
    q = proj_manifold(Stiefel(d, 2 * k), rng.standard_normal((d, 2 * k)))
    model = GeodesicModel(
        origin=q.data[:, :k],
        direction=q.data[:, k:],
        rates=rng.uniform(0.5, 1.5, k),
        times=np.linspace(0.0, 1.0, snapshots),
    )
    data = []
    for t in model.times:
        coeff = rng.standard_normal((k, samples))
        noise = noise_std * rng.standard_normal((d, samples))
        data.append(model.frame(t) @ coeff + noise)
    return data, model


# ---------------------------------------------------------------------------
# Separable form of the rate marginal


@dataclasses.dataclass(frozen=True, eq=False)
class ThetaCoefficients:
    """Per-(snapshot, coordinate) constants of the separable rate marginal
    and the per-coordinate curvature bounds of its gradient."""

    alpha: np.ndarray  # (T, k)
    beta: np.ndarray
    gamma: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    b: np.ndarray
    lips: np.ndarray  # (k,): 4 * sum_i r_ij t_i^2


def theta_coefficients(
    h: np.ndarray, y: np.ndarray, data: list, times: np.ndarray
) -> ThetaCoefficients:
    t_count, k = len(data), h.shape[1]
    alpha = np.empty((t_count, k))
    beta = np.empty((t_count, k))
    gamma = np.empty((t_count, k))
    for i, x in enumerate(data):
        p = x.T @ h
        q = x.T @ y
        alpha[i] = np.sum(p * p, axis=0)
        gamma[i] = np.sum(q * q, axis=0)
        beta[i] = np.sum(p * q, axis=0)
    half = 0.5 * (alpha - gamma)
    r = np.hypot(half, beta)
    phi = np.arctan2(beta, half)
    phi[r <= 1e-300] = 0.0  # the phase is irrelevant when r vanishes
    b = 0.5 * (alpha + gamma)
    lips = 4.0 * np.sum(r * (times[:, None] ** 2), axis=0)
    return ThetaCoefficients(alpha, beta, gamma, r, phi, b, lips)


def theta_marginal_value(
    coeffs: ThetaCoefficients, theta: np.ndarray, times: np.ndarray
) -> float:
    angles = 2.0 * np.outer(times, np.ones_like(theta)) * theta[None, :]
    return -float(np.sum(coeffs.r * np.cos(angles - coeffs.phi) + coeffs.b))


def theta_marginal_grad(
    coeffs: ThetaCoefficients, theta: np.ndarray, times: np.ndarray
) -> np.ndarray:
    angles = 2.0 * times[:, None] * theta[None, :]
    return 2.0 * np.sum(
        coeffs.r * times[:, None] * np.sin(angles - coeffs.phi), axis=0
    )


# ---------------------------------------------------------------------------
# Objective and gradients in the (Q, theta) variables


def _halves(q: np.ndarray) -> tuple:
    k = q.shape[1] // 2
    return q[:, :k], q[:, k:]


def _estimate_frames(q: np.ndarray, theta: np.ndarray, times: np.ndarray):
    h, y = _halves(q)
    for t in times:
        yield h * np.cos(theta * t) + y * np.sin(theta * t)


def objective(
    q: np.ndarray, theta: np.ndarray, data: list, times: np.ndarray
) -> float:
    total = 0.0
    for x, u in zip(data, _estimate_frames(q, theta, times)):
        total += float(np.sum((x.T @ u) ** 2))
    return -total


def grad_q(
    q: np.ndarray, theta: np.ndarray, data: list, times: np.ndarray
) -> np.ndarray:
    g = np.zeros_like(q)
    for x, t, u in zip(data, times, _estimate_frames(q, theta, times)):
        m = x @ (x.T @ u)  # = X X^T U(t), d x k
        c = np.cos(theta * t)
        s = np.sin(theta * t)
        g += np.hstack([m * c, m * s])
    return -2.0 * g


def build_problem(data: list, times: np.ndarray, d: int, k: int) -> BlockProblem:
    q_kind = Stiefel(d, 2 * k)
    t_kind = Euclidean(k, 1)

    def value(state) -> float:
        return objective(state[0].data, state[1].data.ravel(), data, times)

    def egrad_block(state, i: int) -> np.ndarray:
        q = state[0].data
        theta = state[1].data.ravel()
        if i == 0:
            return grad_q(q, theta, data, times)
        h, y = _halves(q)
        coeffs = theta_coefficients(h, y, data, times)
        return theta_marginal_grad(coeffs, theta, times).reshape(-1, 1)

    return BlockProblem(
        manifolds=(q_kind, t_kind),
        constraints=(WholeManifold(), WholeManifold()),
        value=value,
        egrad_block=egrad_block,
    )


def surrogate_specs(
    data: list, times: np.ndarray, lam_q: float, lam_theta: float
) -> tuple:
    """Frame block: linear surrogate with quadratic damping, minimized by a
    polar projection of lam_q * Q - grad_Q f (the family weight is lam_q/2
    because its penalty carries no half).  Rate block: per-coordinate
    gradient step weighted by the curvature bound plus lam_theta."""

    def theta_weights(cycle, state, i) -> np.ndarray:
        h, y = _halves(state[0].data)
        coeffs = theta_coefficients(h, y, data, times)
        return (coeffs.lips + lam_theta).reshape(-1, 1)

    return (
        SurrogateSpec(REGULARIZED_LINEAR_STIEFEL, lam=0.5 * lam_q),
        SurrogateSpec(PROX_LINEAR, lam=theta_weights),
    )


def block_update(
    q: np.ndarray,
    theta: np.ndarray,
    data: list,
    times: np.ndarray,
    lam_q: float,
    lam_theta: float,
) -> tuple:
    """One explicit (frame, rates) update pair; mirrors what the driver does
    through the surrogate machinery."""
    d, two_k = q.shape
    q_new = proj_manifold(
        Stiefel(d, two_k), lam_q * q - grad_q(q, theta, data, times)
    ).data
    h, y = _halves(q_new)
    coeffs = theta_coefficients(h, y, data, times)
    grad = theta_marginal_grad(coeffs, theta, times)
    theta_new = theta - grad / (coeffs.lips + lam_theta)
    return q_new, theta_new


# ---------------------------------------------------------------------------
# Error metric


def geodesic_error(
    estimate: GeodesicModel, truth: GeodesicModel, grid=None
) -> float:
    """Root mean squared projector mismatch along the path, normalized to
    [0, 1] (0 when the spans coincide at every grid time, 1 when they stay
    orthogonal)."""
    grid = truth.times if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty evaluation grid")
    k = truth.origin.shape[1]
    total = 0.0
    for t in grid:
        ue = estimate.frame(t)
        ut = truth.frame(t)
        diff = ue @ ue.T - ut @ ut.T
        total += float(np.sum(diff * diff)) / (2.0 * k)
    return float(np.sqrt(total / grid.size))


def model_from_state(state, k: int, times: np.ndarray) -> GeodesicModel:
    q = state[0].data
    return GeodesicModel(
        origin=q[:, :k],
        direction=q[:, k:],
        rates=state[1].data.ravel().copy(),
        times=times,
    )


# ---------------------------------------------------------------------------
# Setup


def initial_state(
    model: GeodesicModel, d: int, k: int, how: str, seed: int
) -> ProductPoint:
    q_kind = Stiefel(d, 2 * k)
    t_kind = Euclidean(k, 1)
    if how == "truth":
        q = Point(q_kind, model.stacked())
        theta = Point(t_kind, model.rates.reshape(-1, 1))
    elif how == "random":
        rng = np.random.default_rng(seed)
        q = proj_manifold(q_kind, rng.standard_normal((d, 2 * k)))
        theta = Point(t_kind, rng.uniform(0.5, 1.5, k).reshape(-1, 1))
    else:
        raise ValueError(f"unknown init mode {how!r}")
    return ProductPoint((q, theta))


def from_config(params: dict) -> RunSetup:
    d = int(params.get("d", 30))
    k = int(params.get("k", 3))
    snapshots = int(params.get("snapshots", 10))
    samples = int(params.get("samples", 5))
    noise_std = float(params.get("noise_std", 0.1))
    lam_q = float(params.get("lam_q", 0.01))
    lam_theta = float(params.get("lam_theta", 0.01))
    seed = int(params.get("seed", 0))
    how = str(params.get("init", "random"))
    stop_tol = params.get("stop_tol")

    data, model = generate(d, k, snapshots, samples, noise_std, seed)
    problem = build_problem(data, model.times, d, k)
    config = SolverConfig(
        max_cycles=int(params.get("max_cycles", 300)),
        surrogate_specs=surrogate_specs(data, model.times, lam_q, lam_theta),
        seed=seed,
        stationarity_every=int(params.get("stationarity_every", 1)),
        stop_tol=None if stop_tol is None else float(stop_tol),
    )
    # the random init draws from its own stream so data stays byte-stable
    init = initial_state(model, d, k, how, seed + 1)

    def metric(result: RunResult) -> float:
        est = model_from_state(result.final, k, model.times)
        return geodesic_error(est, model)

    return RunSetup(
        name="subspace-tracking",
        problem=problem,
        config=config,
        init=init,
        final_metric=metric,
        metric_name="geodesic_error",
        params={
            "d": d,
            "k": k,
            "snapshots": snapshots,
            "samples": samples,
            "noise_std": noise_std,
            "lam_q": lam_q,
            "lam_theta": lam_theta,
            "init": how,
        },
    )
