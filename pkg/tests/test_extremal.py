import math

import numpy as np
import pytest

from varik import extremal as ex
from varik import finsler as fs
from varik.finsler import NoetherSpec, noether_current
from varik.extremal import BvpProblem, GaugeSpec


@pytest.fixture(scope="module")
def oscillator():
    return fs.lift_conventional("0.5*qd1^2 - 0.5*q1^2", 1)


@pytest.fixture(scope="module")
def brach():
    return ex.brachistochrone_structure()


# ---------------------------------------------------------------------------
# reduced dynamics


def test_newton_acceleration_is_force_over_mass(rng):
    m = 1.7
    s = fs.FinslerStructure.from_text("(m/2)*y1^2/y0 - (V0*x1^4 + 0.5*x1^2)*y0", 2, {"m": m, "V0": 0.3})
    for x1, v, t in rng.uniform(-1.5, 1.5, size=(100, 3)):
        acc = ex.reduced_acceleration(s, GaugeSpec(0), [t, x1], [1.0, v])
        assert acc[0] == 0.0
        assert acc[1] == pytest.approx(-(4 * 0.3 * x1**3 + x1) / m, rel=1e-10, abs=1e-12)


def test_euclidean_acceleration_vanishes(rng):
    s = fs.FinslerStructure.from_text("sqrt(y0^2 + y1^2 + y2^2)", 3)
    for x in rng.normal(size=(20, 5)):
        acc = ex.reduced_acceleration(s, GaugeSpec(0), list(x[:3]), [1.0, x[3], x[4]])
        assert np.max(np.abs(acc)) <= 1e-13


def test_brachistochrone_acceleration_in_horizontal_gauge(rng, brach):
    for y, yp in zip(rng.uniform(0.1, 2.5, 30), rng.uniform(-2, 2, 30)):
        acc = ex.reduced_acceleration(brach, GaugeSpec(0), [0.4, y], [1.0, yp])
        assert acc[1] == pytest.approx(-(1 + yp**2) / (2 * y), rel=1e-12)


def test_array_states_are_supported(brach):
    y = np.array([0.5, 1.0, 2.0])
    acc = ex.reduced_acceleration(brach, GaugeSpec(0), [np.zeros(3), y], [np.ones(3), np.zeros(3)])
    np.testing.assert_allclose(acc[1], -1 / (2 * y), rtol=1e-12)


def test_degenerate_gauge_raises():
    s = fs.FinslerStructure.from_text("sqrt(y0^2 + y1^2 + y2^2)", 3)
    with pytest.raises(ex.SingularHessian):
        ex.reduced_acceleration(s, GaugeSpec(0), [0.0, 0.0, 0.0], [0.0, 1.0, 0.0])


# ---------------------------------------------------------------------------
# boundary value problems


def test_free_particle():
    s = fs.FinslerStructure.from_text("sqrt(y0^2 + y1^2)", 2)
    r = ex.solve_bvp(BvpProblem(s, GaugeSpec(0), [0, 0], [1, 1], rk4_steps=50))
    assert r.endpoint_miss <= 1e-12
    assert r.verified
    ts = np.linspace(0, 1, 11)
    np.testing.assert_allclose(r.curve.at(ts)[1], ts, atol=1e-12)


def test_oscillator_matches_sine(oscillator):
    r = ex.solve_bvp(BvpProblem(oscillator, GaugeSpec(0), [0, 0], [math.pi / 2, 1], rk4_steps=200))
    ts = np.linspace(0, math.pi / 2, 201)
    x = r.curve.at(ts)
    assert np.max(np.abs(np.asarray(x[1]) - np.sin(ts))) <= 1e-6
    assert r.initial_slope[0] == pytest.approx(1.0, abs=1e-8)
    assert r.diagnostics["verified"] and r.diagnostics["segments"] == 1


def test_gauge_independence_on_cycloid_arc(brach):
    a, b = ex.cycloid(1.0), ex.cycloid(2.5)
    pts = []
    for gs in (GaugeSpec(0), GaugeSpec(1)):
        r = ex.solve_bvp(BvpProblem(brach, gs, a, b, rk4_steps=500))
        assert ex.cycloid_distance(r.curve) <= 1e-8
        pts.append(ex._dense_points(r.curve))
    assert ex.hausdorff_distance(*pts) <= 1e-5


def test_rk4_convergence_order(oscillator):
    errs = []
    for N in (50, 100, 200):
        c = ex.integrate_ivp(oscillator, GaugeSpec(0), [0.0, 0.0], [1.0], 3.0, N)
        errs.append(abs(c.at(c.interval[1])[1] - math.sin(3.0)))
    for coarse, fine in zip(errs, errs[1:]):
        assert 12 <= coarse / fine <= 20


def test_nonconvergence_is_reported(oscillator):
    # the conjugate point at t = pi makes the shooting map degenerate
    with pytest.raises(ex.NonConvergent):
        ex.solve_bvp(BvpProblem(oscillator, GaugeSpec(0), [0, 0], [math.pi, 1], rk4_steps=100, max_iters=8))


# ---------------------------------------------------------------------------
# conservation


def test_free_particle_momentum():
    s = fs.FinslerStructure.from_text("sqrt(y0^2 + y1^2)", 2)
    r = ex.solve_bvp(BvpProblem(s, GaugeSpec(0), [0, 0], [1, 2], rk4_steps=50))
    rep = ex.conserved_along(r, noether_current(s, NoetherSpec(["0", "1"])))
    assert rep["max_drift"] <= 1e-7
    assert rep["initial"] == pytest.approx(2 / math.sqrt(5), abs=1e-10)


def test_oscillator_energy(oscillator):
    r = ex.solve_bvp(BvpProblem(oscillator, GaugeSpec(0), [0, 0], [math.pi / 2, 1], rk4_steps=200))
    rep = ex.conserved_along(r, noether_current(oscillator, NoetherSpec(["1", "0"])))
    assert rep["max_drift"] <= 1e-7
    assert rep["initial"] == pytest.approx(-0.5, abs=1e-8)


def test_momentum_along_a_flat_direction():
    s = fs.lift_conventional("0.5*(qd1^2 + qd2^2) - 0.5*q2^2", 2)
    r = ex.solve_bvp(BvpProblem(s, GaugeSpec(0), [0, 0, 0], [1.2, 0.7, 0.4], rk4_steps=200))
    flat = ex.conserved_along(r, noether_current(s, NoetherSpec(["0", "1", "0"])))
    curved = ex.conserved_along(r, noether_current(s, NoetherSpec(["0", "0", "1"])))
    assert flat["max_drift"] <= 1e-7
    assert curved["max_drift"] > 1e-2


# ---------------------------------------------------------------------------
# brachistochrone helpers


def test_cycloid_travel_time_matches_length(brach):
    c = ex.cycloid_curve(0.5, math.pi)
    assert fs.finsler_length(brach, c) == pytest.approx(ex.cycloid_travel_time(2.0, 1.0, 0.5, math.pi), rel=1e-10)


def test_cycloid_distance_and_hausdorff():
    th = np.linspace(0.2, 3.0, 400)
    P = np.stack(ex.cycloid(th), axis=-1)
    assert ex.cycloid_distance(P) <= 1e-12
    assert ex.cycloid_distance(P + [0.0, 1e-3]) == pytest.approx(1e-3, rel=0.2)
    assert ex.hausdorff_distance(P, P[::3]) <= 1e-4
    assert ex.hausdorff_distance(P, P + [0.0, 0.01]) == pytest.approx(0.01, rel=0.05)


# ---------------------------------------------------------------------------
# validation


def test_problem_validation(oscillator):
    with pytest.raises(ValueError):
        BvpProblem(oscillator, GaugeSpec(0), [0, 0, 0], [1, 1])
    with pytest.raises(ValueError):
        BvpProblem(oscillator, GaugeSpec(2), [0, 0], [1, 1])
    with pytest.raises(ValueError):
        BvpProblem(oscillator, GaugeSpec(0), [0, 0], [0, 1])
    with pytest.raises(ValueError):
        BvpProblem(oscillator, [], [0, 0], [1, 1])
    with pytest.raises(ValueError):
        BvpProblem(oscillator, GaugeSpec(0), [0, 0], [1, 1], rk4_steps=0)
    with pytest.raises(ValueError):
        GaugeSpec(0, direction=2)
    with pytest.raises(ValueError):
        GaugeSpec(0, power=0)
