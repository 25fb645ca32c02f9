import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from varik import exterior as ext
from varik import finsler as fs
from varik import kawafield as kf
from varik import lagexpr as lx
from varik.exterior import QuadratureSpec
from varik.finsler import NoetherSpec
from varik.kawafield import ArealStructure
from varik.paths import Curve, Patch

M, E, PHI = 1.0, 1.0, 0.3
OMEGA = 1.0 / (2 * M) - E * PHI  # dispersion for kappa = 1


def max_abs(R):
    return max(float(np.max(np.abs(np.asarray(r)))) for r in R)


# ---------------------------------------------------------------------------
# lifts


def test_graph_lift_against_permutation_oracle():
    p = Patch(["t1", "t2", "t1^2*t2 + sin(t2)", "exp(t1)*t2"], [(0, 1), (0, 1)])
    t = [0.3, 0.7]
    vals = kf.lift_field(p, t)
    _, J = ext.jacobian(p.evaluate, t)
    for r, I in enumerate(itertools.combinations(range(4), 2)):
        assert vals[4 + r] == pytest.approx(ext.leibniz_determinant(J, I), abs=1e-14)
    f_t1, f_t2 = 2 * t[0] * t[1], t[0] ** 2 + math.cos(t[1])
    y = dict(zip(itertools.combinations(range(4), 2), vals[4:]))
    assert y[(0, 1)] == 1.0
    assert y[(0, 2)] == pytest.approx(f_t2)
    assert y[(1, 2)] == pytest.approx(-f_t1)


def test_linear_patch_minors_are_constant(rng):
    A = rng.normal(size=(4, 2))
    p = Patch([(lambda t, i=i: A[i, 0] * t[0] + A[i, 1] * t[1]) for i in range(4)], [(0, 1), (0, 1)])
    for t in ([0.1, 0.2], [0.9, 0.4]):
        vals = kf.lift_field(p, t)
        for r, I in enumerate(itertools.combinations(range(4), 2)):
            assert vals[4 + r] == pytest.approx(np.linalg.det(A[list(I)]), abs=1e-14)


def test_k1_lift_is_tangent_lift():
    c = Curve(["t^2", "sin(t)", "t"], (0, 1))
    np.testing.assert_allclose(kf.lift_field(c, [0.4]), fs.tangent_lift(c)([0.4]), atol=1e-15)


@pytest.mark.parametrize("n,k", [(n, k) for n in range(2, 6) for k in range(1, min(n, 3) + 1)])
def test_permuted_index_names_carry_the_sign(n, k):
    sig = lx.CoordSignature.areal(n, k)
    ys = sig.block("yI")
    vals = [0.0] * n + [float(r + 1) for r in range(len(ys))]
    for r, I in enumerate(itertools.combinations(range(1, n + 1), k)):
        for perm in itertools.permutations(I):
            name = "y" + "".join(map(str, perm))
            assert lx.parse(name, sig).evaluate(vals) == ext.perm_sign(perm) * (r + 1)
        if k >= 2:
            rep = "y" + "".join(map(str, (I[0],) * 2 + I[2:]))
            assert lx.parse(rep, sig).evaluate(vals) == 0.0


# ---------------------------------------------------------------------------
# homogeneity


def test_debroglie_homogeneity():
    rep = kf.check_homogeneity_field(kf.debroglie())
    assert rep["max_rel_residual_scaling"] <= 1e-10
    assert rep["max_rel_residual_euler"] <= 1e-10


def test_trivial_and_broken_densities():
    ok = kf.check_homogeneity_field(ArealStructure.from_text("y12", 3, 2))
    assert ok["max_rel_residual_scaling"] == 0.0 and ok["max_rel_residual_euler"] == 0.0
    bad = kf.check_homogeneity_field(ArealStructure.from_text("y12^2", 3, 2), lambdas=(2.0,))
    assert bad["max_rel_residual_scaling"] > 0.1


# ---------------------------------------------------------------------------
# forms and area


def test_k_form_of_volume_density():
    s = ArealStructure.from_text("y12", 3, 2)
    c = kf.kawaguchi_k_form(s)([0.1] * 6)
    assert c[(0, 1)] == 1.0
    assert all(abs(v) == 0.0 for key, v in c.items() if key != (0, 1))


def test_debroglie_k_form_coefficients(rng):
    s = kf.debroglie(M, E, "0.3 + 0.1*x2")
    form = kf.kawaguchi_k_form(s)
    for _ in range(5):
        x = list(rng.uniform(0.2, 1.0, 4))
        y = list(rng.uniform(0.5, 1.5, 6))  # y12 y13 y14 y23 y24 y34
        c = form(x + y)
        y12, y13, y14 = y[0], y[1], y[2]
        phi = 0.3 + 0.1 * x[1]
        assert c[(0, 1)] == pytest.approx(y14 * y13 / (2 * M * y12**2) + E * phi * x[2] * x[3], rel=1e-13)
        assert c[(0, 2)] == pytest.approx(-y14 / (2 * M * y12), rel=1e-13)
        assert c[(0, 3)] == pytest.approx(-y13 / (2 * M * y12), rel=1e-13)
        assert c[(1, 2)] == pytest.approx(-0.5j * x[3], rel=1e-13)
        assert c[(1, 3)] == pytest.approx(0.5j * x[2], rel=1e-13)
        assert abs(c.get((2, 3), 0.0)) == 0.0


def test_area_of_unit_square():
    s = ArealStructure.from_text("y12", 2, 2)
    p = Patch(["t1", "t2"], [(0, 1), (0, 1)])
    assert kf.kawaguchi_area(s, p, cross_check=True) == pytest.approx(1.0, abs=1e-12)


def test_area_invariance_under_square_map():
    s = ArealStructure.from_text("sqrt(y12^2 + y13^2 + y23^2)*(1 + x3^2)", 3, 2)
    p = Patch(["t1", "t2", "t1*t2 + 0.3*sin(t1)"], [(1, 4), (0, 1)])
    r = p.reparameterize(lambda s_: [s_[0] ** 2, s_[1]], [(1, 2), (0, 1)])
    a, b = kf.kawaguchi_area(s, p), kf.kawaguchi_area(s, r)
    assert a == pytest.approx(b, rel=1e-8)


def test_debroglie_area_against_trapezoid_oracle():
    s = kf.debroglie(M, E, "0.3")
    p = kf.plane_wave(1.0, OMEGA)
    val = kf.kawaguchi_area(s, p, cross_check=True)
    g = np.linspace(0, 1, 1201)
    T, X = np.meshgrid(g, g, indexing="ij")
    psi = np.exp(1j * (X - OMEGA * T))
    psib = 1 / psi
    # K in the (t, x) gauge: y12 = 1, y13 = psi_x, y14 = psib_x, y23 = -psi_t, y24 = -psib_t
    y13, y14, y23, y24 = 1j * psi, -1j * psib, 1j * OMEGA * psi, -1j * OMEGA * psib
    dens = 0.5j * (psib * (-y23) - psi * (-y24)) - y14 * y13 / (2 * M) + E * PHI * psi * psib
    oracle = trapezoid(trapezoid(dens, g, axis=1), g)
    assert val == pytest.approx(oracle, abs=1e-6)


def test_form_integral_equals_area():
    s = ArealStructure.from_text("sqrt(y12^2 + y13^2 + y23^2) + x1*y23", 3, 2)
    p = Patch(["t1 + 0.1*t2^2", "t2", "cos(t1*t2)"], [(0, 1), (0, 1)])
    q = QuadratureSpec()
    a = kf.kawaguchi_area(s, p, q)
    b = ext.integrate(kf.kawaguchi_k_form(s), kf.multi_tangent_lift(p), p.rect, q)
    assert a == pytest.approx(b, rel=2 * q.refine_rtol)


# ---------------------------------------------------------------------------
# field EL


def test_debroglie_residual_reproduces_schroedinger_operators():
    s = kf.debroglie(M, E, "0.3 + 0.2*x2")
    # arbitrary complex fields, not solutions
    p = Patch(
        ["t1", "t2", "exp(i*t2)*(1 + t1^2) + t2^3", "cos(t1 + 2*t2) - i*t1*t2"],
        [(0, 1), (0, 1)],
        kind="complex",
    )
    for t, x in [(0.2, 0.3), (0.7, 0.9)]:
        R = kf.el_field_residual(s, p, [t, x])
        phi = 0.3 + 0.2 * x
        psi = np.exp(1j * x) * (1 + t * t) + x**3
        psi_t = np.exp(1j * x) * 2 * t
        psi_xx = -np.exp(1j * x) * (1 + t * t) + 6 * x
        pb = math.cos(t + 2 * x) - 1j * t * x
        pb_t = -math.sin(t + 2 * x) - 1j * x
        pb_xx = -4 * math.cos(t + 2 * x)
        psi_x = 1j * np.exp(1j * x) * (1 + t * t) + 3 * x * x
        pb_x = -2 * math.sin(t + 2 * x) - 1j * t
        # the first two rows are implied by the field equations
        assert R[0] == pytest.approx(-(R[2] * psi_t + R[3] * pb_t), abs=1e-10)
        assert R[1] == pytest.approx(-(R[2] * psi_x + R[3] * pb_x), abs=1e-10)
        assert R[2] == pytest.approx(-(1j * pb_t - pb_xx / (2 * M) - E * phi * pb), abs=1e-10)
        assert R[3] == pytest.approx(1j * psi_t + psi_xx / (2 * M) + E * phi * psi, abs=1e-10)


def test_plane_wave_solves_and_detuned_wave_does_not():
    s = kf.debroglie(M, E, "0.3")
    g = np.linspace(0, 1, 20)
    T, X = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    assert max_abs(kf.el_field_residual(s, kf.plane_wave(1.0, OMEGA), [T, X])) <= 1e-7
    assert max_abs(kf.el_field_residual(s, kf.plane_wave(1.0, 1.1 * OMEGA), [T, X])) > 1e-2


def test_exact_density_has_no_euler_lagrange_equations():
    s = ArealStructure.from_text("y12", 3, 2)
    p = Patch(["t1^2 + t2", "sin(t2)*t1", "t1*t2^3"], [(0, 1), (0, 1)])
    assert max_abs(kf.el_field_residual(s, p, [np.array([0.2, 0.5]), np.array([0.3, 0.8])])) <= 1e-12


def test_form_route_matches_direct_route(rng):
    s = ArealStructure.from_text("sqrt(y12^2 + y13^2 + y23^2)*(1 + 0.2*x3) + x1*x2*y13", 3, 2)
    p = Patch(["t1 + 0.3*t2^2", "t2 - 0.1*t1", "sin(t1 + t2)"], [(0, 1), (0, 1)])
    for t in rng.uniform(0.1, 0.9, size=(5, 2)):
        a = kf.el_field_residual(s, p, list(t))
        b = kf.el_field_residual_direct(s, p, list(t))
        for u, v in zip(a, b):
            assert u == pytest.approx(v, abs=1e-10)


@given(st.lists(st.floats(-0.5, 0.5), min_size=4, max_size=4))
def test_residual_is_annihilated_by_patch_velocities(cs):
    s = ArealStructure.from_text("sqrt(y12^2 + y13^2 + y23^2)*(1 + x3^2) + x2*y13", 3, 2)
    p = Patch(
        [f"t1 + {cs[0]}*t2^2", f"t2 + {cs[1]}*t1*t2", f"{cs[2]}*sin(2*t1) + {cs[3]}*t2^2"],
        [(0, 1), (0, 1)],
    )
    t = [np.array([0.2, 0.6]), np.array([0.4, 0.7])]
    R = kf.el_field_residual(s, p, t)
    _, J = ext.jacobian(p.evaluate, t)
    for a in range(2):
        assert np.max(np.abs(sum(R[mu] * J[mu][a] for mu in range(3)))) <= 1e-8


def test_exterior_derivative_identity(rng):
    s = ArealStructure.from_text("sqrt(y12^2 + y13^2 + y23^2)*(1 + x1*x3) + x2^2*y23", 3, 2)
    lhs = ext.exterior_derivative(kf.kawaguchi_k_form(s))
    rhs = kf.el_form_field(s) - kf.el_form_field_correction(s)
    for p in rng.uniform(0.3, 1.5, size=(20, s.m)):
        a, b = lhs(list(p)), rhs(list(p))
        for key in set(a) | set(b):
            assert abs(a.get(key, 0.0) - b.get(key, 0.0)) <= 1e-9


# ---------------------------------------------------------------------------
# Noether


def test_zero_generator_gives_zero_form():
    c = kf.noether_field_current(kf.debroglie(), NoetherSpec(["0"] * 4))([0.5] * 10)
    assert all(abs(v) == 0 for v in c.values())


def test_time_translation_current_is_conserved_on_plane_wave():
    s = kf.debroglie(M, E, "0.3")
    val = kf.noether_conservation(s, NoetherSpec(["1", "0", "0", "0"]), kf.plane_wave(1.0, OMEGA), [(0.2, 0.8), (0.1, 0.9)])
    assert abs(val) <= 1e-6
    # off-shell the integral picks up u . R, so a modulated wave is not conserved
    p = Patch(
        ["t1", "t2", f"(1 + 0.5*t1)*exp(i*(t2 - {OMEGA}*t1))", f"exp(-i*(t2 - {OMEGA}*t1))"],
        [(0, 1), (0, 1)],
        kind="complex",
    )
    assert abs(kf.noether_conservation(s, NoetherSpec(["1", "0", "0", "0"]), p, [(0.2, 0.8), (0.1, 0.9)])) > 1e-2


def test_k1_current_is_the_mechanical_current(rng):
    text = "sqrt(y1^2 + y2^2)*(1 + x1^2)"
    s1 = ArealStructure.from_text(text, 2, 1)
    f = fs.FinslerStructure.from_text(text.replace("y1", "Y0").replace("y2", "y1").replace("Y0", "y0").replace("x1", "X0").replace("x2", "x1").replace("X0", "x0"), 2)
    for p in rng.uniform(0.2, 1.5, size=(5, 4)):
        a = kf.noether_field_current(s1, NoetherSpec(["x2", "1"]))(list(p))[()]
        b = fs.noether_current(f, NoetherSpec(["x1", "1"]))(list(p))
        assert a == pytest.approx(b, rel=1e-14)


# ---------------------------------------------------------------------------
# conventional lift


def test_unit_lagrangian_lifts_to_volume():
    s = kf.lift_field_conventional("1", 2, 1)
    p = Patch(["t1", "t2", "t1*t2"], [(0, 2), (0, 3)])
    assert kf.kawaguchi_area(s, p) == pytest.approx(6.0, abs=1e-12)


def test_debroglie_lagrangian_lifts_to_debroglie_density(rng):
    L = kf.DEBROGLIE_L.format(phi="0.3 + 0.1*t2")
    lifted = kf.lift_field_conventional(L, 2, 2, {"m": M, "e": E}, "complex")
    ref = kf.debroglie(M, E, "0.3 + 0.1*x2")
    for p in rng.uniform(0.3, 1.5, size=(10, 10)):
        assert lifted(list(p)) == pytest.approx(ref(list(p)), rel=1e-13)
    rep = kf.check_homogeneity_field(lifted)
    assert rep["max_rel_residual_scaling"] <= 1e-10 and rep["max_rel_residual_euler"] <= 1e-10


def test_scalar_field_gauge_pullback_is_wave_equation():
    s = kf.lift_field_conventional("0.5*(q1d1^2 - q1d2^2)", 2, 1)
    rep = kf.check_homogeneity_field(s)
    assert rep["max_rel_residual_scaling"] <= 1e-10 and rep["max_rel_residual_euler"] <= 1e-10
    sol = Patch(["t1", "t2", "sin(t2 - t1) + (t1 + t2)^3"], [(0, 1), (0, 1)])
    t = [np.array([0.3, 0.6]), np.array([0.2, 0.9])]
    assert max_abs(kf.el_field_residual(s, sol, t)) <= 1e-10
    other = Patch(["t1", "t2", "t1^2*t2"], [(0, 1), (0, 1)])
    R = kf.el_field_residual(s, other, t)
    # d'Alembertian of t^2 x is 2x; the EL row is minus it
    np.testing.assert_allclose(R[2], -2 * t[1], atol=1e-10)
