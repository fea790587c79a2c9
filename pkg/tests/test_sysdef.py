import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowshadow.sysdef import (CATALOG, Binary, CatalogError, Const, EvalError, ParseError, Pow, SpaceSpec,
                               SystemSpec, Unary, Var, builtin, eval_field, evaluate, format_expr,
                               format_system, parse_expr, parse_system)


def test_catalog_examples():
    assert format_expr(builtin("pitchfork1d").fields[0]) == "x0 - x0^3"
    assert eval_field(builtin("circle_ns"), [math.pi])[0] == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(CatalogError):
        builtin("torus_linear")
    with pytest.raises(CatalogError):
        builtin("pitchfork1d", alpha=1.0)
    with pytest.raises(CatalogError):
        builtin("no_such_system")


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_round_trip(name):
    spec = builtin(name, {"alpha": 0.5} if name == "torus_linear" else {})
    text = format_system(spec)
    again = parse_system(text)
    assert again.fields == spec.fields
    assert again.space == spec.space
    assert again.region == spec.region
    assert format_system(again) == text


def test_parse_file_with_region_and_comments():
    text = "# demo\nname = damped\nspace = box(-3, 3; -3, 3)\nregion = box(-1, 1; -2, 2)\n\ndx0 = x1\ndx1 = -x0 - 0.5*x1\n"
    spec = parse_system(text)
    assert spec.dim == 2
    assert spec.region == ((-1.0, 1.0), (-2.0, 2.0))
    np.testing.assert_allclose(eval_field(spec, [1.0, 2.0]), [2.0, -2.0])


def test_precedence_and_unary_minus():
    # unary minus binds tighter than ^ in this grammar: -x0^2 is (-x0)^2
    e = parse_expr("-x0^2 + 2*x0/4 - (1 - x0)", 1)
    X = np.array([[3.0]])
    assert evaluate(e, X)[0] == pytest.approx(9 + 1.5 - (1 - 3))
    assert evaluate(parse_expr("-(x0^2)", 1), X)[0] == -9


@pytest.mark.parametrize("text, line, col", [
    ("name = a\nspace = box(0, 1)\ndx0 = x0 +", 3, 11),
    ("name = a\nspace = box(0, 1)\ndx0 = x1", 3, 7),
    ("name = a\nspace = box(0, 1)\ndx0 = x0^1.5", 3, 10),
    ("name = a\nspace = ball(1)\ndx0 = 1", 2, 9),
    ("name = a\nspace = torus(1)\ndx0 = 1\ndx0 = 2", 4, 1),
    ("space = box(0, 1)\ndx0 = 1", 1, 1),
])
def test_positioned_errors(text, line, col):
    with pytest.raises(ParseError) as ei:
        parse_system(text)
    assert (ei.value.line, ei.value.col) == (line, col)


def test_missing_field_is_dimension_mismatch():
    with pytest.raises(ParseError, match="dimension mismatch"):
        parse_system("name = a\nspace = box(0, 1; 0, 1)\ndx0 = 1")


def test_eval_errors():
    spec = parse_system("name = a\nspace = box(-1, 1)\ndx0 = 1/x0")
    with pytest.raises(EvalError, match="division by zero"):
        eval_field(spec, [0.0])
    with pytest.raises(EvalError, match="sqrt"):
        evaluate(parse_expr("sqrt(x0)"), np.array([[-1.0]]))


def test_torus_normalization():
    s = SpaceSpec.torus(1.0)
    assert s.normalize(np.array([1.25]))[0] == pytest.approx(0.25)
    assert s.normalize(np.array([-1e-20]))[0] < 1.0
    with pytest.raises(ValueError):
        SystemSpec("bad", SpaceSpec.box((0.0, 1.0)), (Var(1),))


def _exprs(dim=2):
    leaf = st.one_of(st.builds(Const, st.floats(0, 1e6, allow_nan=False)), st.builds(Var, st.integers(0, dim - 1)))
    return st.recursive(leaf, lambda sub: st.one_of(
        st.builds(Unary, st.sampled_from(["neg", "sin", "cos", "exp", "tanh", "sqrt", "abs"]), sub),
        st.builds(Binary, st.sampled_from(["+", "-", "*", "/"]), sub, sub),
        st.builds(Pow, sub, st.integers(0, 6))), max_leaves=12)


@settings(max_examples=100, deadline=None)
@given(_exprs())
def test_random_ast_round_trip(e):
    assert parse_expr(format_expr(e), 2) == e


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=80))
def test_parser_total_on_text(s):
    try:
        parse_system(s)
    except ParseError as e:
        assert e.line >= 1 and e.col >= 1
