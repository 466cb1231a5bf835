"""Two-block strictly convex quadratic demo.

    f(t1, t2) = (t1 - 1)^2 + (t2 - 2)^2 + t1 * t2

on a pair of scalar Euclidean blocks.  The unique stationary point solves
2*t1 + t2 = 2 and t1 + 2*t2 = 4, i.e. (0, 2) with f = 1.  Proximal block
updates have the closed form

    t1 <- (2 - t2 + lam * a1) / (2 + lam)
    t2 <- (4 - t1 + lam * a2) / (2 + lam)

so the demo exercises the driver end to end with exact solves.
"""

from __future__ import annotations

import math

import numpy as np

from ..driver import BlockProblem, RunResult, SolverConfig
from ..geometry import Euclidean, Point, ProductPoint
from ..surrogates import EUCLIDEAN_PROXIMAL, SurrogateSpec, WholeManifold
from . import RunSetup

KIND = Euclidean(1, 1)
FIXED_POINT = (0.0, 2.0)
OPTIMAL_VALUE = 1.0
# Hessian [[2, 1], [1, 2]]: each marginal is 2-smooth
MARGINAL_SMOOTHNESS = 2.0


def _scalars(state) -> tuple:
    return float(state[0].data[0, 0]), float(state[1].data[0, 0])


def value(state) -> float:
    a, b = _scalars(state)
    return (a - 1.0) ** 2 + (b - 2.0) ** 2 + a * b


def egrad_block(state, i: int) -> np.ndarray:
    a, b = _scalars(state)
    if i == 0:
        return np.array([[2.0 * (a - 1.0) + b]])
    return np.array([[2.0 * (b - 2.0) + a]])


def build_problem() -> BlockProblem:
    return BlockProblem(
        manifolds=(KIND, KIND),
        constraints=(WholeManifold(), WholeManifold()),
        value=value,
        egrad_block=egrad_block,
        smoothness_bound=MARGINAL_SMOOTHNESS,
        lower_bound=OPTIMAL_VALUE,
    )


def exact_solvers() -> tuple:
    def first(state, i, anchor, lam):
        _, b = _scalars(state)
        a0 = float(anchor.data[0, 0])
        return Point(KIND, np.array([[(2.0 - b + lam * a0) / (2.0 + lam)]]))

    def second(state, i, anchor, lam):
        a, _ = _scalars(state)
        b0 = float(anchor.data[0, 0])
        return Point(KIND, np.array([[(4.0 - a + lam * b0) / (2.0 + lam)]]))

    return (first, second)


def initial_state(t1: float = 0.0, t2: float = 0.0) -> ProductPoint:
    return ProductPoint(
        (Point(KIND, np.array([[t1]])), Point(KIND, np.array([[t2]])))
    )


def distance_to_solution(result: RunResult) -> float:
    a, b = _scalars(result.final)
    return math.hypot(a - FIXED_POINT[0], b - FIXED_POINT[1])


def from_config(params: dict) -> RunSetup:
    lam = float(params.get("lam", 1.0))
    max_cycles = int(params.get("max_cycles", 200))
    exact = str(params.get("exact", "true")).lower() in ("1", "true", "yes")
    stop_tol = params.get("stop_tol")
    spec = SurrogateSpec(
        EUCLIDEAN_PROXIMAL,
        lam=lam,
        inner_budget=int(params.get("inner_budget", 200)),
        inner_tol=float(params.get("inner_tol", 1e-11)),
    )
    config = SolverConfig(
        max_cycles=max_cycles,
        surrogate_specs=(spec, spec),
        seed=int(params.get("seed", 0)),
        stationarity_every=int(params.get("stationarity_every", 1)),
        stop_tol=None if stop_tol is None else float(stop_tol),
        exact_solvers=exact_solvers() if exact else None,
    )
    return RunSetup(
        name="quadratic-demo",
        problem=build_problem(),
        config=config,
        init=initial_state(
            float(params.get("t1", 0.0)), float(params.get("t2", 0.0))
        ),
        final_metric=distance_to_solution,
        metric_name="distance_to_solution",
        params={"lam": lam, "exact": exact},
    )
