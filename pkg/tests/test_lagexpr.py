import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from varik import lagexpr as lx
from varik import scalarcalc as sc
from varik.lagexpr import CoordSignature, ExprError, ExprSyntaxError, UnknownVariableError
from varik.scalarcalc import Jet

NEWTON = "(m/2)*(y1^2+y2^2)/y0 - V0*x1^2*y0"
MECH3 = ["x0", "x1", "x2", "y0", "y1", "y2"]


def test_newton_expression_has_two_divisions():
    e = lx.parse(NEWTON, MECH3, constants=["m", "V0"])
    assert lx.count_ops(e.ast, "/") == 2
    assert set(e.var_names) == set(MECH3)


def test_brachistochrone_expression_evaluates():
    e = lx.parse("sqrt((yx^2+yy^2)/(2*g*xy))", ["xx", "xy", "yx", "yy"], constants=["g"])
    val = e.evaluate([0.0, 0.5, 3.0, 4.0], {"g": 1.0})
    assert val == pytest.approx(5.0)


def test_syntax_error_location():
    with pytest.raises(ExprSyntaxError) as info:
        lx.parse("x1+", ["x1"])
    assert (info.value.line, info.value.col) == (1, 4)


def test_multiline_error_location():
    with pytest.raises(ExprSyntaxError) as info:
        lx.parse("x1 +\n  * x1", ["x1"])
    assert info.value.line == 2


def test_unknown_identifier_is_named():
    with pytest.raises(UnknownVariableError) as info:
        lx.parse("x1 + q7", ["x1"])
    assert info.value.name == "q7"
    assert "q7" in str(info.value)


def test_imaginary_unit_needs_complex_mode():
    with pytest.raises(lx.ImaginaryUnitError):
        lx.parse("i*x1", ["x1"])
    e = lx.parse("i*x1", ["x1"], kind="complex")
    assert e.evaluate([2.0]) == 2j


def test_precedence_and_associativity():
    names = ["a"]
    assert lx.parse("2^3^2", names).evaluate([0.0]) == 2.0 ** 9
    assert lx.parse("-2^2", names).evaluate([0.0]) == -4.0
    assert lx.parse("8/4/2", names).evaluate([0.0]) == 1.0
    assert lx.parse("1-2-3", names).evaluate([0.0]) == -4.0
    assert lx.parse("2+3*4", names).evaluate([0.0]) == 14.0


def test_plain_variable():
    assert lx.parse("y0", MECH3).evaluate([0, 0, 0, 5.0, 0, 0]) == 5.0


def test_newton_value_and_momentum():
    e = lx.parse("(m/2)*(y1^2+y2^2)/y0 - V*y0", MECH3, constants=["m", "V"])
    env = {"m": 2.0, "V": 0.0}
    point = [0.0, 0.0, 0.0, 1.0, 3.0, 4.0]
    assert e.evaluate(point, env) == pytest.approx(25.0)
    f = e.bind(env)
    seeded = [Jet.constant(v, 1, 1) for v in point]
    seeded[4] = Jet.variable(3.0, 0, 1, 1)
    dFdy1 = sc.derivative(f(seeded), (1,))
    h = 1e-6
    fd = (f(point[:4] + [3.0 + h, 4.0]) - f(point[:4] + [3.0 - h, 4.0])) / (2 * h)
    assert dFdy1 == pytest.approx(6.0, rel=1e-14)
    assert dFdy1 == pytest.approx(fd, rel=1e-8)


def test_unbound_constant():
    e = lx.parse("m*y0", ["y0"], constants=["m"])
    with pytest.raises(lx.UnboundConstantError):
        e.evaluate([1.0])


def test_wrong_value_count():
    e = lx.parse("x1*x2", ["x1", "x2"])
    with pytest.raises(ValueError):
        e.evaluate([1.0])


def test_division_by_zero_jet():
    f = lx.parse("1/y0", ["y0"]).bind()
    with pytest.raises(sc.JetError):
        f([Jet.variable(0.0, 0, 1, 1)])


def test_signature_blocks():
    sig = CoordSignature.areal(4, 2)
    assert sig.block("yI") == ("y12", "y13", "y14", "y23", "y24", "y34")
    assert len(set(sig.names)) == len(sig.names)


def test_areal_alias_reversed_index_flips_sign():
    sig = CoordSignature.areal(3, 2)
    e = lx.parse("y21 + 2*y11", sig)
    vals = [0.0] * 3 + [1.5, 0.0, 0.0]
    assert e.evaluate(vals) == -1.5


# ---------------------------------------------------------------------------
# properties

VARS = ["x1", "x2", "y1"]
leaf = st.one_of(st.sampled_from(VARS), st.integers(0, 9).map(str), st.sampled_from(["0.5", "1e-3", "2.25"]))


def _combine(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*", "/"]), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})")
    unary = st.tuples(st.sampled_from(["sin", "cos", "exp", "sqrt", "abs", "log", "-"]), children).map(
        lambda t: f"{t[0]}({t[1]})"
    )
    power = st.tuples(children, st.integers(-3, 3)).map(lambda t: f"({t[0]})^{t[1]}")
    return st.one_of(binary, unary, power)


expressions = st.recursive(leaf, _combine, max_leaves=12)


@given(expressions)
def test_print_parse_round_trip(src):
    e = lx.parse(src, VARS)
    again = lx.parse(lx.to_text(e.ast), VARS)
    assert again == e


@given(expressions, st.lists(st.floats(0.1, 2.0), min_size=3, max_size=3))
def test_degree_zero_jets_equal_plain_scalars(src, vals):
    f = lx.parse(src, VARS).bind()
    try:
        plain = f(vals)
    except (ExprError, ArithmeticError, ValueError):
        return
    jets = [Jet.constant(v, 1, 0) for v in vals]
    j = f(jets)
    value = j.value if isinstance(j, Jet) else j
    if isinstance(plain, float) and math.isnan(plain):
        assert math.isnan(value)
    else:
        assert value == plain


@given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), max_size=40))
def test_parser_is_total_on_ascii(src):
    try:
        lx.parse(src, VARS)
    except ExprError:
        pass


@given(st.lists(st.sampled_from(list("x12y()+-*/^ .e") + ["sin", "sqrt", "x1", "i"]), max_size=25).map("".join))
def test_parser_is_total_on_token_soup(src):
    try:
        lx.parse(src, VARS)
    except ExprError:
        pass


def test_deep_nesting_is_a_structured_error():
    with pytest.raises(ExprError):
        lx.parse("(" * 5000 + "x1" + ")" * 5000, VARS)


def test_array_evaluation_broadcasts():
    f = lx.parse("x1*sin(x2) + y1^2", VARS).bind()
    a = np.linspace(0.1, 1.0, 5)
    out = f([a, a, a])
    np.testing.assert_allclose(out, a * np.sin(a) + a * a, rtol=1e-15)
