"""Numerical oracles: finite-difference gradient checks through retractions,
empirical gradient-Lipschitz (smoothness) probes, chord-versus-geodesic
distance checks, and log-log convergence-rate fits."""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

from .geometry import (
    SPD,
    Euclidean,
    Point,
    Sphere,
    dist,
    exp_map,
    grad_dist_sq,
    inner,
    norm,
    random_point,
    random_tangent,
    retract,
    transport,
)


@dataclasses.dataclass(frozen=True)
class ProbeReport:
    name: str
    passed: bool
    samples: int
    seed: int
    stats: dict
    target: float | None = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


def fd_gradient_check(
    value,
    rgrad,
    x: Point,
    h: float = 1e-5,
    directions: int = 20,
    seed: int = 0,
    tol: float = 1e-4,
    name: str = "fd_gradient",
) -> ProbeReport:
    """Compares <rgrad(x), eta> with the central difference of the pullback
    t -> value(retract(x, t*eta)) over random unit tangents.  The derivative
    of the pullback at 0 equals the Riemannian pairing for any retraction."""
    if not 1e-8 <= h <= 1e-2:
        raise ValueError("step h outside the trustworthy range [1e-8, 1e-2]")
    rng = np.random.default_rng(seed)
    g = rgrad(x)
    errors = []
    for _ in range(directions):
        eta = random_tangent(x, rng).data
        plus = value(retract(x, h * eta))
        minus = value(retract(x, -h * eta))
        fd = (plus - minus) / (2.0 * h)
        analytic = inner(x, g, eta)
        errors.append(abs(fd - analytic) / max(1.0, abs(fd)))
    worst = float(max(errors))
    return ProbeReport(
        name=name,
        passed=worst <= tol,
        samples=directions,
        seed=seed,
        stats={"max": worst, "min": float(min(errors)), "mean": float(np.mean(errors))},
        target=tol,
    )


def gsmooth_probe(
    kind,
    grad_fn,
    sample_pairs=None,
    samples: int = 50,
    seed: int = 0,
    scale: float = 1.0,
    target: float | None = None,
    tol: float = 1e-3,
    name: str = "gsmooth",
) -> ProbeReport:
    """Empirical Lipschitz ratio ||grad F(x) - transport(grad F(y))|| / d(x,y)
    over geodesically joined pairs.  Needs exact transport, so the manifold
    must be Euclidean, a sphere, or SPD.  When a target is given the probe
    passes iff the worst ratio matches it within tol."""
    if not isinstance(kind, (Euclidean, Sphere, SPD)):
        raise ValueError(f"no exact transport for {kind}; probe unsupported")
    rng = np.random.default_rng(seed)
    if sample_pairs is None:
        pairs = []
        for _ in range(samples):
            x = random_point(kind, rng)
            eta = random_tangent(x, rng, scale=scale * rng.uniform(0.1, 1.0))
            pairs.append((x, exp_map(x, eta.data)))
    else:
        pairs = list(sample_pairs)
    ratios = []
    for x, y in pairs:
        d = dist(x, y)
        if d <= 1e-12:
            continue
        moved = transport(y, x, grad_fn(y))
        ratios.append(norm(x, grad_fn(x) - moved.data) / d)
    if not ratios:
        raise ValueError("every sampled pair was degenerate")
    worst = float(max(ratios))
    passed = True if target is None else abs(worst - target) <= tol
    return ProbeReport(
        name=name,
        passed=passed,
        samples=len(ratios),
        seed=seed,
        stats={
            "max": worst,
            "min": float(min(ratios)),
            "mean": float(np.mean(ratios)),
        },
        target=target,
    )


def circle_gsmooth_pair(delta: float = math.pi / 3):
    """The half-squared-distance witness on the unit circle: base point
    p = (1, 0) and a pair straddling its antipode at angular offset delta.
    The transported-gradient ratio equals (pi - delta)/delta, hence 2 at
    delta = pi/3."""
    kind = Sphere(2)
    x = Point(kind, np.array([math.cos(math.pi - delta), math.sin(math.pi - delta)]))
    y = Point(kind, np.array([math.cos(math.pi + delta), math.sin(math.pi + delta)]))
    p = Point(kind, np.array([1.0, 0.0]))

    def grad_fn(q: Point) -> np.ndarray:
        return 0.5 * grad_dist_sq(q, p).data

    return grad_fn, [(x, y)]


def circle_gsmooth_probe(delta: float = math.pi / 3, tol: float = 1e-3) -> ProbeReport:
    grad_fn, pairs = circle_gsmooth_pair(delta)
    target = (math.pi - delta) / delta
    return gsmooth_probe(
        Sphere(2),
        grad_fn,
        sample_pairs=pairs,
        target=target,
        tol=tol,
        name="gsmooth_circle",
    )


def euclidean_gsmooth_probe(
    rows: int = 3, cols: int = 2, samples: int = 50, seed: int = 0, tol: float = 1e-3
) -> ProbeReport:
    """Half squared Euclidean distance has a globally 1-Lipschitz gradient;
    the ratio is identically 1."""
    kind = Euclidean(rows, cols)
    rng = np.random.default_rng(seed)
    p = random_point(kind, rng)

    def grad_fn(q: Point) -> np.ndarray:
        return q.data - p.data

    return gsmooth_probe(
        kind,
        grad_fn,
        samples=samples,
        seed=seed + 1,
        target=1.0,
        tol=tol,
        name="gsmooth_euclidean",
    )


def distance_equivalence_probe(
    kind, samples: int = 100, seed: int = 0, name: str = "distance_equivalence"
) -> ProbeReport:
    """Chord never exceeds geodesic distance; reports the empirical lower
    equivalence constant min ||x-y|| / d(x,y).  SPD points are confined to
    the geodesic ball of radius 0.3 around 0.3*I, where every eigenvalue
    stays below 1/sqrt(2) and the chord bound provably holds."""
    rng = np.random.default_rng(seed)

    def draw() -> Point:
        if isinstance(kind, Sphere):
            return random_point(kind, rng)
        if isinstance(kind, SPD):
            center = Point(kind, 0.3 * np.eye(kind.n))
            eta = random_tangent(center, rng, scale=0.3 * rng.uniform(0.0, 1.0))
            return exp_map(center, eta.data)
        raise ValueError(f"probe needs an exact distance; {kind} unsupported")

    ratios = []
    ordered = True
    for _ in range(samples):
        x, y = draw(), draw()
        d = dist(x, y)
        if d <= 1e-12:
            continue
        chord = float(np.linalg.norm((x.data - y.data).ravel()))
        if chord > d * (1.0 + 1e-10):
            ordered = False
        ratios.append(chord / d)
    if not ratios:
        raise ValueError("every sampled pair was degenerate")
    return ProbeReport(
        name=name,
        passed=ordered,
        samples=len(ratios),
        seed=seed,
        stats={
            "max": float(max(ratios)),
            "min": float(min(ratios)),
            "mean": float(np.mean(ratios)),
        },
        target=1.0,
    )


@dataclasses.dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float


def rate_fit(running_min) -> RateFit:
    """Ordinary least squares of log(value) against log(cycle), skipping the
    first tenth of the sequence as initialization burn-in."""
    seq = np.asarray(list(running_min), dtype=float)
    if seq.size < 10:
        raise ValueError("need at least 10 points to fit a rate")
    if np.any(seq <= 0.0):
        raise ValueError("rate fit requires strictly positive values")
    burn = seq.size // 10
    ns = np.arange(1, seq.size + 1, dtype=float)[burn:]
    xs = np.log(ns)
    ys = np.log(seq[burn:])
    slope, intercept = np.polyfit(xs, ys, 1)
    fitted = slope * xs + intercept
    ss_res = float(np.sum((ys - fitted) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 and ss_res == 0.0 else (
        0.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    )
    return RateFit(float(slope), float(intercept), float(r2))
