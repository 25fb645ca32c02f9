import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from varik import exterior as ext
from varik import scalarcalc as sc
from varik.exterior import DifferentialForm, MultiIndex, QuadratureSpec


def form_gap(a: DifferentialForm, b: DifferentialForm, values) -> float:
    ca, cb = a(values), b(values)
    keys = set(ca) | set(cb)
    return max((float(np.max(np.abs(np.asarray(ca.get(k, 0.0)) - np.asarray(cb.get(k, 0.0))))) for k in keys), default=0.0)


# ---------------------------------------------------------------------------
# multi-indices


@pytest.mark.parametrize("n,k", [(n, k) for n in range(1, 7) for k in range(0, n + 1)])
def test_rank_unrank_round_trip(n, k):
    seen = []
    for r in range(math.comb(n, k)):
        mi = MultiIndex.unrank(r, n, k)
        assert mi.rank == r
        seen.append(mi.indices)
    assert seen == sorted(seen) == list(itertools.combinations(range(n), k))


def test_sign_of_permuted_tuples():
    assert ext.perm_sign((0, 1, 2)) == 1
    assert ext.perm_sign((1, 0, 2)) == -1
    assert ext.perm_sign((2, 0, 1)) == 1
    assert ext.perm_sign((0, 0, 1)) == 0
    mi, s = MultiIndex.from_tuple((3, 1), 4)
    assert mi.indices == (1, 3) and s == -1


def test_multi_index_rejects_unordered():
    with pytest.raises(ValueError):
        MultiIndex((2, 1), 3)


# ---------------------------------------------------------------------------
# minors


def test_minor_k1_is_entry():
    J = [[2.5], [-1.0], [4.0]]
    assert ext.minor_determinant(J, (1,)) == -1.0


def test_minor_of_padded_identity():
    J = [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]
    assert ext.minor_determinant(J, (0, 1)) == 1.0
    assert ext.minor_determinant(J, (2, 3)) == 0.0


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_minor_matches_leibniz(rng, k):
    n = 6
    for _ in range(20):
        J = rng.normal(size=(n, k)).tolist()
        for rows in itertools.combinations(range(n), k):
            assert ext.minor_determinant(J, rows) == pytest.approx(ext.leibniz_determinant(J, rows), abs=1e-12)


def test_minor_of_jets():
    t = sc.jet_lift([0.5, 2.0], np.eye(2), 1)
    J = [[t[0], t[1]], [t[1] * t[1], t[0]]]
    d = ext.minor_determinant(J, (0, 1))
    assert d.value == pytest.approx(0.25 - 8.0)


# ---------------------------------------------------------------------------
# wedge and d


def test_wedge_of_coordinate_forms():
    a = ext.coordinate_form(3, (0,))
    b = ext.coordinate_form(3, (1,))
    assert (ext.wedge(a, b))([0.0, 0.0, 0.0]) == {(0, 1): 1.0}
    assert ext.wedge(a, a)([0.0, 0.0, 0.0]) == {}


def test_wedge_degree_overflow():
    a = ext.coordinate_form(2, (0, 1))
    with pytest.raises(ValueError):
        ext.wedge(a, ext.coordinate_form(2, (0,)))


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_wedge_of_scaled_one_forms(p):
    f = lambda v: v[0] * v[2] + 1.0
    g = lambda v: sc.sin(v[1])
    w = ext.wedge(DifferentialForm(3, 1, {(0,): f}), DifferentialForm(3, 1, {(1,): g}))
    # antisymmetrized tensor product: (f dx0 (x) g dx1 - g dx1 (x) f dx0) at index (0, 1)
    T = np.zeros((3, 3))
    T[0, 1] = f(p) * g(p)
    assert w(p)[(0, 1)] == pytest.approx(T[0, 1] - T[1, 0], abs=1e-14)


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_wedge_graded_commutativity_and_associativity(p):
    a = DifferentialForm(4, 1, {(0,): lambda v: v[1], (2,): lambda v: v[3] ** 2})
    b = DifferentialForm(4, 2, {(1, 3): lambda v: v[0] + 1.0, (0, 2): lambda v: v[2]})
    c = DifferentialForm(4, 1, {(1,): 2.0, (3,): lambda v: v[0]})
    assert form_gap(ext.wedge(a, b), ext.wedge(b, a), p) <= 1e-12  # (-1)^(1*2) = +1
    assert form_gap(ext.wedge(a, c), -ext.wedge(c, a), p) <= 1e-12
    ab_c = ext.wedge(ext.wedge(a, c), ext.coordinate_form(4, (2,)))
    a_bc = ext.wedge(a, ext.wedge(c, ext.coordinate_form(4, (2,))))
    assert form_gap(ab_c, a_bc, p) <= 1e-12


def test_d_of_x1_dx2():
    a = DifferentialForm(3, 1, {(1,): lambda v: v[0]})
    assert ext.exterior_derivative(a)([0.3, 0.2, 0.1]) == {(0, 1): 1.0}


def test_dd_vanishes_on_random_points(rng):
    f = ext.function_form(3, lambda v: v[0] * v[1] + sc.sin(v[2]))
    dd = ext.exterior_derivative(ext.exterior_derivative(f))
    for p in rng.uniform(-2, 2, size=(50, 3)):
        assert all(abs(c) <= 1e-12 for c in dd(list(p)).values())


@given(st.lists(st.floats(-1.5, 1.5), min_size=4, max_size=4))
def test_dd_vanishes_on_one_forms(p):
    a = DifferentialForm(4, 1, {(0,): lambda v: sc.exp(v[1] * v[2]), (3,): lambda v: v[0] ** 3 * sc.cos(v[1])})
    dd = ext.exterior_derivative(ext.exterior_derivative(a))
    assert all(abs(c) <= 1e-12 for c in dd(p).values())


def test_lie_derivative_of_invariant_form():
    # rotation generator preserves x dy - y dx
    a = DifferentialForm(2, 1, {(0,): lambda v: -v[1], (1,): lambda v: v[0]})
    L = ext.lie_derivative(a, lambda v: [-v[1], v[0]])
    assert all(abs(c) <= 1e-14 for c in L([0.4, -1.3]).values())


# ---------------------------------------------------------------------------
# pullback and integration


def test_pullback_identity_and_flip():
    a = ext.coordinate_form(3, (0, 1))
    ident = lambda t: [t[0], t[1], 0.0 * t[0]]
    swap = lambda t: [t[1], t[0], 0.0 * t[0]]
    assert ext.pullback_density(a, ident, [0.3, 0.7]) == 1.0
    assert ext.pullback_density(a, swap, [0.3, 0.7]) == -1.0


def test_pullback_of_hilbert_form_equals_density_along_lift():
    from varik.finsler import FinslerStructure, hilbert_form

    s = FinslerStructure.from_text("(1/2)*(y1^2+y2^2)/y0", 3)
    lift = lambda t: [t[0], sc.sin(t[0]), 0.0 * t[0], 1.0 + 0.0 * t[0], sc.cos(t[0]), 0.0 * t[0]]
    for t in (0.0, 0.4, 1.3):
        dens = ext.pullback_density(hilbert_form(s), lift, [t])
        direct = s([t, math.sin(t), 0.0, 1.0, math.cos(t), 0.0])
        assert dens == pytest.approx(direct, abs=1e-14)


def test_integrals_of_coordinate_forms():
    a = ext.coordinate_form(2, (0, 1))
    assert ext.integrate(a, lambda t: list(t), [(0, 1), (0, 1)]) == pytest.approx(1.0, abs=1e-12)
    b = DifferentialForm(1, 1, {(0,): lambda v: v[0]})
    assert ext.integrate(b, lambda t: list(t), [(0, 2)]) == pytest.approx(2.0, abs=1e-12)


def test_integral_reparameterization_invariance():
    a = DifferentialForm(2, 1, {(0,): lambda v: v[1] ** 2, (1,): lambda v: sc.exp(v[0])})
    curve = lambda t: [sc.cos(t[0]), sc.sin(t[0]) + t[0]]
    phi = lambda s: [s[0] ** 3 + s[0]]
    q = QuadratureSpec()
    I1 = ext.integrate(a, curve, [(0.0, 2.0)], q)
    I2 = ext.integrate(a, lambda s: curve(phi(s)), [(0.0, 1.0)], q)
    assert abs(I1 - I2) <= 2 * q.refine_rtol * abs(I1)


def test_orientation_check():
    a = ext.coordinate_form(2, (0, 1))
    with pytest.raises(ext.OrientationError):
        ext.integrate(a, lambda t: [t[1], t[0]], [(0, 1), (0, 1)], orientation=(0, 1))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        ext.integrate(a, lambda t: [t[0], t[1] * (t[0] - 0.2)], [(0, 1), (0, 1)], orientation=(0, 1))
    assert any("orientation" in str(x.message) for x in w)


def test_quadrature_nonconvergence():
    q = QuadratureSpec(gauss_order=2, subdivisions=1, max_levels=1, refine_rtol=1e-14)
    with pytest.raises(ext.NonConvergent):
        ext.quad_rect(lambda t: np.sqrt(np.abs(t[0] - 0.3)), [(0, 1)], q)


def test_quadrature_is_bit_stable():
    f = lambda t: np.exp(t[0] * t[1]) * np.cos(3 * t[1])
    a = ext.quad_rect(f, [(0, 1), (0, 2)])
    b = ext.quad_rect(f, [(0, 1), (0, 2)])
    assert a == b


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(gauss_order=1)
    with pytest.raises(ValueError):
        ext.quad_rect(lambda t: t[0], [(1.0, 1.0)])
