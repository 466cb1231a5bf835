"""Cyclic block majorization-minimization driver.

Each cycle sweeps the blocks in fixed ascending order.  For block i the
marginal objective freezes blocks before i at their current-cycle values
and blocks after i at the previous cycle's values; a majorizing surrogate
is built at the block's previous value and minimized over the block
constraint, either by a caller-supplied exact solver (suboptimality 0) or
by the surrogate module's inner solver, which reports a suboptimality
bound.  The trace records, per cycle: objective, per-block majorization
gaps, suboptimality bounds, step distances, and (on a configurable stride)
the stationarity measure

    sum_i  || feasible-cone projection of -grad_i f ||  /  min{r0, 1}

which vanishes exactly at constrained stationary points: on the interior
of a constraint (or an unconstrained block) the contribution is the plain
gradient norm, while on a ball boundary the component of the descent
direction that points radially outward is removed first.
"""

from __future__ import annotations

import dataclasses
import math
import time
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .geometry import (
    DegenerateInput,
    Point,
    ProductPoint,
    TangentVector,
    check_point,
    dist,
    egrad_to_rgrad,
    norm,
    r_hat,
)
from .surrogates import (
    Constraint,
    SurrogateSpec,
    WholeManifold,
    build_surrogate,
    cone_project_descent,
    minimize_block,
    on_boundary,
    resolve_lam,
    satisfies_constraint,
)


@dataclasses.dataclass(frozen=True, eq=False)
class BlockProblem:
    """An m-block objective over a product of manifolds.

    ``value`` maps a ProductPoint to the objective; ``egrad_block(state, i)``
    returns the Euclidean (ambient) gradient with respect to block i at the
    full state.  ``smoothness_bound`` is an optional analytic bound on the
    geodesic smoothness of the block marginals (one number, or one per
    block); it feeds the suboptimality certification of inexact solves.
    ``lower_bound`` is an optional known lower bound on the objective.
    """

    manifolds: tuple
    constraints: tuple
    value: Callable[[ProductPoint], float]
    egrad_block: Callable[[ProductPoint, int], np.ndarray]
    smoothness_bound: Union[float, tuple, None] = None
    lower_bound: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "manifolds", tuple(self.manifolds))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if len(self.manifolds) != len(self.constraints):
            raise ValueError("one constraint per manifold block is required")

    @property
    def m(self) -> int:
        return len(self.manifolds)

    def block_smoothness(self, i: int) -> Optional[float]:
        b = self.smoothness_bound
        if b is None:
            return None
        if isinstance(b, (tuple, list)):
            return None if b[i] is None else float(b[i])
        return float(b)


@dataclasses.dataclass(frozen=True, eq=False)
class SolverConfig:
    """Outer-loop settings.

    ``exact_solvers`` optionally supplies one closed-form block minimizer
    per block with signature ``solver(state, i, anchor, lam) -> Point``;
    entries may be None to use the inner solver for that block.
    ``stop_tol`` turns on early stopping: the run ends at the first
    measured cycle whose stationarity is at or below the tolerance.
    """

    max_cycles: int
    surrogate_specs: tuple
    seed: int = 0
    stationarity_every: int = 1
    stop_tol: Optional[float] = None
    exact_solvers: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "surrogate_specs", tuple(self.surrogate_specs))
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be at least 1")
        if self.stationarity_every < 1:
            raise ValueError("stationarity stride must be at least 1")
        if self.exact_solvers is not None:
            object.__setattr__(self, "exact_solvers", tuple(self.exact_solvers))


@dataclasses.dataclass(frozen=True)
class IterationRecord:
    """One audit row per cycle (cycle 0 is the initial state)."""

    cycle: int
    objective: float
    gaps: tuple  # per-block g - f at the accepted point
    deltas: tuple  # per-block suboptimality bounds
    certified: tuple  # per-block: is the bound certified
    steps: tuple  # per-block step distance d(previous, accepted)
    stationarity: Optional[float]  # None on unmeasured cycles
    wall_time: float  # seconds since the run started

    @property
    def delta_n(self) -> float:
        return max(self.deltas) if self.deltas else 0.0


@dataclasses.dataclass(frozen=True, eq=False)
class RunResult:
    trace: tuple
    final: ProductPoint
    stopped_early: bool


def _validate_init(problem: BlockProblem, init: ProductPoint) -> None:
    if len(init) != problem.m:
        raise ValueError(
            f"initial state has {len(init)} blocks, problem has {problem.m}"
        )
    for i, x in enumerate(init.blocks):
        if x.manifold != problem.manifolds[i]:
            raise DegenerateInput(f"block {i} lives on the wrong manifold")
        check_point(x, tol=1e-8)
        if not satisfies_constraint(problem.constraints[i], x):
            raise DegenerateInput(f"block {i} violates its constraint")


def run_rbmm(
    problem: BlockProblem, config: SolverConfig, init: ProductPoint
) -> RunResult:
    """Run the cyclic solver from a feasible initial state.

    Deterministic given the problem data and config; randomness only ever
    enters through data generation upstream.
    """
    if len(config.surrogate_specs) != problem.m:
        raise ValueError("one surrogate spec per block is required")
    if config.exact_solvers is not None and len(config.exact_solvers) != problem.m:
        raise ValueError("one exact-solver slot per block is required")
    _validate_init(problem, init)

    t0 = time.perf_counter()
    state = init
    zeros = (0.0,) * problem.m
    measured0 = 0 % config.stationarity_every == 0
    trace = [
        IterationRecord(
            cycle=0,
            objective=float(problem.value(state)),
            gaps=zeros,
            deltas=zeros,
            certified=(True,) * problem.m,
            steps=zeros,
            stationarity=(
                stationarity_measure(problem, state) if measured0 else None
            ),
            wall_time=time.perf_counter() - t0,
        )
    ]

    stopped_early = False
    for n in range(1, config.max_cycles + 1):
        gaps, deltas, certs, steps = [], [], [], []
        for i in range(problem.m):
            spec: SurrogateSpec = config.surrogate_specs[i]
            anchor = state[i]
            lam = resolve_lam(spec, n, state, i)
            marginal_value, marginal_egrad = _marginals(problem, state, i)
            inst = build_surrogate(
                spec, marginal_value, marginal_egrad, anchor, lam=lam
            )

            solver = None
            if config.exact_solvers is not None:
                solver = config.exact_solvers[i]
            if solver is not None:
                new_point = solver(state, i, anchor, lam)
                delta, cert = 0.0, True
            else:
                margin = None
                l_i = problem.block_smoothness(i)
                if l_i is not None and np.isscalar(lam):
                    margin = float(lam) - l_i
                res = minimize_block(
                    inst,
                    problem.constraints[i],
                    budget=spec.inner_budget,
                    tol=spec.inner_tol,
                    strong_margin=margin,
                )
                new_point, delta, cert = res.point, res.delta_bound, res.certified

            gaps.append(float(inst.value(new_point)) - float(marginal_value(new_point)))
            steps.append(dist(anchor, new_point))
            deltas.append(delta)
            certs.append(cert)
            state = state.replace(i, new_point)

        measured = n % config.stationarity_every == 0
        stat = stationarity_measure(problem, state) if measured else None
        trace.append(
            IterationRecord(
                cycle=n,
                objective=float(problem.value(state)),
                gaps=tuple(gaps),
                deltas=tuple(deltas),
                certified=tuple(certs),
                steps=tuple(steps),
                stationarity=stat,
                wall_time=time.perf_counter() - t0,
            )
        )
        if config.stop_tol is not None and stat is not None and stat <= config.stop_tol:
            stopped_early = True
            break

    return RunResult(trace=tuple(trace), final=state, stopped_early=stopped_early)


def _marginals(problem: BlockProblem, state: ProductPoint, i: int):
    def marginal_value(p: Point) -> float:
        return float(problem.value(state.replace(i, p)))

    def marginal_egrad(p: Point) -> np.ndarray:
        return problem.egrad_block(state.replace(i, p), i)

    return marginal_value, marginal_egrad


def stationarity_measure(problem: BlockProblem, state: ProductPoint) -> float:
    """Block-summed worst-case directional derivative over feasible unit
    directions, normalized by min{r0, 1} (= 1 for all supported kinds)."""
    total = 0.0
    for i in range(problem.m):
        x = state[i]
        rg = egrad_to_rgrad(x, problem.egrad_block(state, i))
        cons: Constraint = problem.constraints[i]
        rh = r_hat(x.manifold)
        if isinstance(cons, WholeManifold) or not on_boundary(cons, x):
            total += norm(x, rg) / rh
        else:
            v = cone_project_descent(cons, x, TangentVector(x, -rg.data))
            total += norm(x, v) / rh
    return total


@dataclasses.dataclass(frozen=True)
class AuditReport:
    """Outcome of checking a trace against the descent guarantees."""

    violations: tuple  # cycles n with f(n-1) - f(n) < -m*delta_n - tol
    descent_ok: bool
    total_gap: float
    gap_partial_sums: tuple
    delta_sum: float
    gap_bound: float  # f(0) - min f + m * sum(delta) + slack
    gap_bound_ok: bool
    running_min_stationarity: tuple


def audit_trace(
    trace: Sequence[IterationRecord], m: Optional[int] = None, tolerance: float = 1e-10
) -> AuditReport:
    """Check a trace against the per-cycle descent bound
    f(n-1) - f(n) >= -m*delta_n - tolerance and the summability of the
    majorization gaps."""
    if not trace:
        raise ValueError("empty trace")
    if m is None:
        m = len(trace[0].gaps)

    violations = []
    partial = 0.0
    partials = []
    delta_sum = 0.0
    for prev, rec in zip(trace, trace[1:]):
        drop = prev.objective - rec.objective
        if drop < -m * rec.delta_n - tolerance:
            violations.append(rec.cycle)
        partial += sum(rec.gaps)
        partials.append(partial)
        delta_sum += rec.delta_n

    objectives = [r.objective for r in trace]
    bound = objectives[0] - min(objectives) + m * delta_sum + 1e-9
    nondecreasing = all(b >= a - 1e-12 for a, b in zip(partials, partials[1:]))
    gap_bound_ok = nondecreasing and (not partials or partials[-1] <= bound)

    running = []
    best = math.inf
    for rec in trace:
        if rec.stationarity is not None:
            best = min(best, rec.stationarity)
            running.append(best)

    return AuditReport(
        violations=tuple(violations),
        descent_ok=not violations,
        total_gap=partials[-1] if partials else 0.0,
        gap_partial_sums=tuple(partials),
        delta_sum=delta_sum,
        gap_bound=bound,
        gap_bound_ok=gap_bound_ok,
        running_min_stationarity=tuple(running),
    )
