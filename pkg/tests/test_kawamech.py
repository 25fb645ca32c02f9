import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from varik import exterior as ext
from varik import finsler as fs
from varik import kawamech as km
from varik import scalarcalc as sc
from varik.finsler import NoetherSpec
from varik.kawamech import KawaMechStructure
from varik.paths import Curve

QDD = "0.5*qdd1^2"


def qdd_structure():
    return km.lift2_conventional(QDD, 1)


def test_zermelo_of_lifted_acceleration_lagrangian():
    rep = km.check_zermelo(qdd_structure())
    for key in ("res_scaling", "res_A", "res_B", "res_derived"):
        assert rep[key] <= 1e-10, key


def test_zermelo_of_first_order_density():
    s = KawaMechStructure.from_text("sqrt(y0^2 + y1^2)*(1 + x0^2)", 2)
    rep = km.check_zermelo(s)
    assert rep["res_B"] == 0.0
    assert rep["res_A"] <= 1e-12
    assert rep["res_scaling"] <= 1e-12


def test_zermelo_counterexample():
    s = KawaMechStructure.from_text("z0^2 + z1^2", 2)
    assert km.check_zermelo(s)["res_B"] > 0.1


# ---------------------------------------------------------------------------
# lifts


def test_lift2_of_parabola():
    c = Curve(["t", "t^2"], (0, 2))
    np.testing.assert_allclose(km.lift2(c, 1.0), [1, 1, 1, 2, 0, 2], atol=1e-15)


def test_lift2_of_constant_curve():
    c = Curve(["1.5", "-2"], (0, 1))
    np.testing.assert_allclose(km.lift2(c, 0.3), [1.5, -2, 0, 0, 0, 0], atol=0)


@given(st.floats(0.1, 0.9))
def test_second_order_reparameterization_law(s):
    c = Curve(["sin(t)", "t^3 + t"], (0, 2))
    phi = lambda u: u + u**2
    d1, d2 = 1 + 2 * s, 2.0
    rho = c.reparameterize(phi, (0.1, 0.9))
    a = km.lift2(rho, s)
    b = km.lift2(c, phi(s))
    n = 2
    for mu in range(n):
        assert a[n + mu] == pytest.approx(d1 * b[n + mu], abs=1e-10)
        assert a[2 * n + mu] == pytest.approx(d1**2 * b[2 * n + mu] + d2 * b[n + mu], abs=1e-10)


# ---------------------------------------------------------------------------
# form and length


def test_fk_form_of_first_order_density_is_hilbert_form(rng):
    text = "sqrt(y0^2 + y1^2) + x1*y0"
    s2 = KawaMechStructure.from_text(text, 2)
    s1 = fs.FinslerStructure.from_text(text, 2)
    for p in rng.uniform(0.2, 2.0, size=(5, 6)):
        a, b = km.fk_form(s2)(list(p)), fs.hilbert_form(s1)(list(p[:4]))
        for mu in range(2):
            assert a[(mu,)] == pytest.approx(b[(mu,)], rel=1e-15)
        assert all(abs(a.get((k,), 0.0)) == 0.0 for k in (2, 3))


def test_fk_form_coefficients_match_finite_differences(rng):
    s = qdd_structure()
    form = km.fk_form(s)
    h = 1e-6
    for p in rng.uniform(0.3, 2.0, size=(5, 6)):
        c = form(list(p))
        for mu in range(2):
            e = np.zeros(6)
            e[2 + mu] = h
            dKy = (s.f(list(p + e)) - s.f(list(p - e))) / (2 * h)
            e = np.zeros(6)
            e[4 + mu] = h
            dKz = (s.f(list(p + e)) - s.f(list(p - e))) / (2 * h)
            assert c[(mu,)] == pytest.approx(dKy, rel=1e-6, abs=1e-8)
            assert c[(2 + mu,)] == pytest.approx(2 * dKz, rel=1e-6, abs=1e-8)


def test_fk_length_of_time_density():
    s = KawaMechStructure.from_text("y0", 2)
    assert km.fk_length(s, Curve(["t", "t^2"], (0.0, 2.0))) == pytest.approx(2.0, abs=1e-12)


def test_fk_length_of_cubic():
    s = qdd_structure()
    c = Curve(["t", "t^3"], (0.0, 1.0))
    assert km.fk_length(s, c, cross_check=True) == pytest.approx(6.0, rel=1e-12)


def test_fk_length_invariance_under_square_map():
    s = km.lift2_conventional("0.5*qdd1^2 + q1*qd1^2", 1)
    c = Curve(["t", "sin(t) + 0.1*t^3"], (1.0, 3.0))
    r = Curve(["s^2", "sin(s^2) + 0.1*s^6"], (1.0, math.sqrt(3.0)), param="s")
    a, b = km.fk_length(s, c), km.fk_length(s, r)
    assert a == pytest.approx(b, rel=1e-8)


def test_form_integral_equals_fk_length():
    s = km.lift2_conventional("0.5*qdd1^2 - qd1*q1", 1)
    c = Curve(["t + 0.2*t^2", "cos(t)"], (0.0, 1.5))
    a = km.fk_length(s, c)
    b = ext.integrate(km.fk_form(s), km.second_order_lift(c), [c.interval])
    assert a == pytest.approx(b, rel=2e-9)


# ---------------------------------------------------------------------------
# EL residual


def test_cubic_solves_acceleration_lagrangian():
    c = Curve(["t", "1 + t + t^3"], (0.0, 2.0))
    R = km.el2_residual(qdd_structure(), c, np.linspace(0, 2, 21))
    assert max(float(np.max(np.abs(r))) for r in R) <= 1e-7


def test_sine_does_not():
    c = Curve(["t", "sin(t)"], (0.0, 3.0))
    R = km.el2_residual(qdd_structure(), c, math.pi / 2)
    assert abs(R[1]) > 0.5
    assert abs(R[1]) == pytest.approx(1.0, abs=1e-8)


def test_gauge_pullback_matches_classical_equation():
    # L = qdd^2/2 - q qd^2/2 + sin(t) q; classical: q'''' + qd^2/2 + q qdd + sin t
    s = km.lift2_conventional("0.5*qdd1^2 - 0.5*q1*qd1^2 + sin(t)*q1", 1)
    c = Curve(["t", "sin(t) + 0.2*t^2"], (0.0, 2.0))
    for t in (0.1, 0.7, 1.9):
        q = math.sin(t) + 0.2 * t * t
        qd = math.cos(t) + 0.4 * t
        qdd = -math.sin(t) + 0.4
        q4 = math.sin(t)
        expect = q4 + 0.5 * qd * qd + q * qdd + math.sin(t)
        assert km.el2_residual(s, c, t)[1] == pytest.approx(expect, abs=1e-7)


coeffs = st.lists(st.floats(-1.0, 1.0), min_size=4, max_size=4)


@given(coeffs)
def test_contraction_identity(cs):
    s = km.lift2_conventional("0.5*qdd1^2 + 0.3*q1*qd1^2 - cos(q1)", 1)
    c = Curve([f"t + {0.2 * cs[0]}*t^2", f"{cs[1]}*sin(2*t) + {cs[2]}*t^3 + {cs[3]}"], (0.0, 1.0))
    ts = np.linspace(0.0, 1.0, 7)
    R = km.el2_residual(s, c, ts)
    xd = c.derivatives(ts, 1)[1]
    assert np.max(np.abs(R[0] * xd[0] + R[1] * xd[1])) <= 1e-8


# ---------------------------------------------------------------------------
# Noether


def test_zero_generator():
    f = km.noether2_current(qdd_structure(), NoetherSpec(["0", "0"]))
    assert np.all(f.along(Curve(["t", "t^3"], (0, 1)), np.linspace(0, 1, 5)) == 0.0)


def test_translation_current_along_cubics():
    f = km.noether2_current(qdd_structure(), NoetherSpec(["0", "1"]))
    c = Curve(["t", "2 - t + 0.5*t^2 + 1.5*t^3"], (0, 2))
    vals = np.asarray(f.along(c, np.linspace(0, 2, 9)))
    np.testing.assert_allclose(vals, -9.0, atol=1e-10)


def test_translation_current_conserved_on_extremal():
    # q'''' + q'' = 0 for L = qdd^2/2 - qd^2/2; q = a + b t + c cos t + d sin t
    s = km.lift2_conventional("0.5*qdd1^2 - 0.5*qd1^2", 1)
    c = Curve(["t", "1 + 0.5*t + cos(t) + 0.3*sin(t)"], (0, 3))
    ts = np.linspace(0, 3, 31)
    assert max(float(np.max(np.abs(r))) for r in km.el2_residual(s, c, ts)) <= 1e-10
    f = np.asarray(km.noether2_current(s, NoetherSpec(["0", "1"])).along(c, ts))
    assert np.max(np.abs(f - f[0])) <= 1e-7
    e = np.asarray(km.noether2_current(s, NoetherSpec(["1", "0"])).along(c, ts))
    assert np.max(np.abs(e - e[0])) <= 1e-7


# ---------------------------------------------------------------------------
# conventional lift and restricted form


def test_lift_of_linear_acceleration(rng):
    s = km.lift2_conventional("qdd1", 1)
    for x0, x1, y0, y1, z0, z1 in rng.uniform(0.3, 2.0, size=(10, 6)):
        assert s([x0, x1, y0, y1, z0, z1]) == pytest.approx((z1 * y0 - z0 * y1) / y0**2, rel=1e-14)


def test_theta_k_of_first_order_lagrangian():
    L = "0.5*qd1^2 - q1^2*t"
    s2 = km.lift2_conventional(L, 1)
    s1 = fs.lift_conventional(L, 1)
    v = [0.4, 0.3, 1.2]
    a = km.theta_k_restrict(s2)(v + [0.8])
    b = fs.cartan_restrict(s1)(v)
    assert a[(0,)] == pytest.approx(b[(0,)]) and a[(1,)] == pytest.approx(b[(1,)])
    assert abs(a.get((2,), 0.0)) == 0.0


def test_theta_k_coefficients_of_acceleration_lagrangian():
    s = qdd_structure()
    t, q, qd, qdd = 0.1, 0.5, -0.7, 1.3
    c = km.theta_k_restrict(s)([t, q, qd, qdd])
    lag = 0.5 * qdd**2
    # L dt + L_qd (dq - qd dt) + 2 L_qdd (dqd - qdd dt)
    assert c[(0,)] == pytest.approx(lag - 2 * qdd * qdd, rel=1e-14)
    assert c.get((1,), 0.0) == pytest.approx(0.0, abs=1e-15)
    assert c[(2,)] == pytest.approx(2 * qdd, rel=1e-14)
    # finite-difference check of the dq' coefficient against K itself
    h = 1e-6
    K = lambda z1: s([t, q, 1.0, qd, 0.0, z1])
    assert c[(2,)] == pytest.approx(2 * (K(qdd + h) - K(qdd - h)) / (2 * h), rel=1e-7)


def test_theta_k_pullback_is_lagrangian_along_holonomic_lift():
    s = km.lift2_conventional("0.5*qdd1^2 + q1*qd1 - t^2", 1)
    q = lambda t: sc.sin(t) + t**3
    jet = lambda u: [u[0], q(u[0]), sc.cos(u[0]) + 3 * u[0] ** 2, -sc.sin(u[0]) + 6 * u[0]]
    for t in (0.2, 1.0, 1.4):
        qv, qdv, qddv = math.sin(t) + t**3, math.cos(t) + 3 * t * t, -math.sin(t) + 6 * t
        dens = ext.pullback_density(km.theta_k_restrict(s), jet, [t])
        assert dens == pytest.approx(0.5 * qddv**2 + qv * qdv - t * t, abs=1e-10)


# ---------------------------------------------------------------------------
# first variation


@pytest.mark.parametrize(
    "L,curve",
    [
        ("0.5*qdd1^2 + q1*qd1^2", ["t", "sin(t)"]),
        ("0.5*qdd1^2*(1 + q1^2) - cos(qd1)", ["t + 0.1*t^2", "t^2 - 0.5*t"]),
        ("qdd1^2 + qdd2*qd1 - q2^2*t", ["t", "cos(t)", "0.3*t^3"]),
    ],
)
def test_variation_identity(L, curve):
    m = len(curve) - 1
    s = km.lift2_conventional(L, m)
    c = Curve(curve, (0.0, 1.0))
    # xi vanishes with its first derivative at x0 = 0 and x0 = 1 (x0 = t + ...)
    lo, hi = c.at(0.0)[0], c.at(1.0)[0]
    bump = lambda x: (x[0] - lo) ** 2 * (x[0] - hi) ** 2
    xi = [lambda x: 0.3 * bump(x)] + [
        (lambda x, i=i: bump(x) * (1.0 + x[i] * x[0] ** i)) for i in range(1, m + 1)
    ]
    lhs, rhs = km.variation_identity(s, c, xi)
    assert lhs == pytest.approx(rhs, abs=1e-6)
    assert abs(rhs) > 1e-4
