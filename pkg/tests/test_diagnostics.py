"""Finite-difference checks, smoothness-constant probes, distance
equivalence, and log-log rate fits."""

import json
import math

import numpy as np
import pytest

from rbmm.diagnostics import (
    ProbeReport,
    circle_gsmooth_probe,
    distance_equivalence_probe,
    euclidean_gsmooth_probe,
    fd_gradient_check,
    gsmooth_probe,
    rate_fit,
)
from rbmm.geometry import (
    SPD,
    Euclidean,
    Point,
    Sphere,
    Stiefel,
    dist,
    egrad_to_rgrad,
    grad_dist_sq,
    random_point,
)


def sphere_quadratic(p: Point):
    # f(x) = <x, A x> restricted to the sphere
    n = p.data.size
    rng = np.random.default_rng(42)
    a = rng.standard_normal((n, n))
    a = 0.5 * (a + a.T)

    def value(x: Point) -> float:
        return float(x.data @ a @ x.data)

    def rgrad(x: Point):
        return egrad_to_rgrad(x, 2.0 * a @ x.data)

    return value, rgrad


def test_fd_gradient_check_passes_on_correct_gradient():
    x = random_point(Sphere(6), np.random.default_rng(0))
    value, rgrad = sphere_quadratic(x)
    report = fd_gradient_check(value, rgrad, x, seed=1)
    assert report.passed
    assert report.stats["max"] <= 1e-4


def test_fd_gradient_check_catches_scaled_gradient():
    x = random_point(Sphere(6), np.random.default_rng(2))
    value, rgrad = sphere_quadratic(x)

    def wrong(p):
        g = rgrad(p)
        return type(g)(p, 2.0 * g.data)

    report = fd_gradient_check(value, wrong, x, seed=1)
    assert not report.passed


def test_fd_gradient_check_rejects_untrustworthy_step():
    x = random_point(Euclidean(2, 2), np.random.default_rng(0))
    value, rgrad = sphere_quadratic(x)  # only the signature matters here
    with pytest.raises(ValueError):
        fd_gradient_check(lambda p: 0.0, rgrad, x, h=1e-12)
    with pytest.raises(ValueError):
        fd_gradient_check(lambda p: 0.0, rgrad, x, h=0.5)


def test_probe_report_serializes_to_json():
    report = ProbeReport("demo", True, 3, 0, {"max": 1.0}, target=2.0)
    decoded = json.loads(report.to_json())
    assert decoded["name"] == "demo"
    assert decoded["passed"] is True
    assert decoded["stats"]["max"] == 1.0


def test_circle_probe_reports_ratio_two():
    report = circle_gsmooth_probe()
    assert report.passed
    assert report.stats["max"] == pytest.approx(2.0, abs=1e-3)


def test_circle_probe_ratio_grows_toward_antipode():
    # (pi - delta)/delta: the empirical smoothness constant blows up as the
    # pair closes on the antipode of the base point
    tight = circle_gsmooth_probe(delta=math.pi / 6)
    assert tight.stats["max"] == pytest.approx(5.0, abs=1e-3)


def test_euclidean_probe_ratio_is_one():
    report = euclidean_gsmooth_probe(samples=40, seed=3)
    assert report.passed
    assert report.stats["max"] == pytest.approx(1.0, abs=1e-9)
    assert report.stats["min"] == pytest.approx(1.0, abs=1e-9)


def test_gsmooth_constant_function_has_zero_ratio():
    report = gsmooth_probe(
        Euclidean(2, 2),
        lambda q: np.zeros((2, 2)),
        samples=10,
        seed=0,
    )
    assert report.stats["max"] == 0.0


def test_gsmooth_sphere_half_distance_squared_exceeds_one():
    # curvature makes the transported-gradient ratio of (1/2)d^2(., p)
    # exceed the flat constant 1 somewhere
    kind = Sphere(4)
    p = random_point(kind, np.random.default_rng(7))

    def grad_fn(q: Point) -> np.ndarray:
        return 0.5 * grad_dist_sq(q, p).data

    report = gsmooth_probe(kind, grad_fn, samples=200, seed=8, scale=2.5)
    assert report.stats["max"] > 1.0


def test_gsmooth_rejects_manifold_without_exact_transport():
    with pytest.raises(ValueError):
        gsmooth_probe(Stiefel(4, 2), lambda q: np.zeros((4, 2)))


def test_distance_equivalence_sphere_and_spd():
    for kind in (Sphere(6), SPD(3)):
        report = distance_equivalence_probe(kind, samples=100, seed=4)
        assert report.passed
        assert report.stats["max"] <= 1.0 + 1e-10
        assert 0.0 < report.stats["min"] <= 1.0


def test_distance_equivalence_rejects_unsupported_kind():
    with pytest.raises(ValueError):
        distance_equivalence_probe(Euclidean(2, 2), samples=5)


def test_rate_fit_recovers_exact_power_laws():
    ns = np.arange(1, 201, dtype=float)
    half = rate_fit(3.0 * ns**-0.5)
    assert half.slope == pytest.approx(-0.5, abs=1e-6)
    assert half.r_squared == pytest.approx(1.0, abs=1e-12)
    quarter = rate_fit(0.7 * ns**-0.25)
    assert quarter.slope == pytest.approx(-0.25, abs=1e-6)


def test_rate_fit_constant_sequence_has_zero_slope():
    fit = rate_fit(np.full(50, 2.5))
    assert fit.slope == pytest.approx(0.0, abs=1e-12)


def test_rate_fit_intercept_matches_prefactor():
    ns = np.arange(1, 101, dtype=float)
    fit = rate_fit(3.0 * ns**-0.5)
    assert math.exp(fit.intercept) == pytest.approx(3.0, rel=1e-6)


def test_rate_fit_input_validation():
    with pytest.raises(ValueError):
        rate_fit(np.ones(9))
    with pytest.raises(ValueError):
        rate_fit(np.array([1.0] * 12 + [0.0]))
    with pytest.raises(ValueError):
        rate_fit(np.array([1.0] * 12 + [-2.0]))
