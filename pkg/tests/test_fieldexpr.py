import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from doublephase.fieldexpr import (BinOp, Call, DomainSpec, ExprEvalError, ExprSyntaxError,
                                   Neg, Num, ScalarField, Var, as_field, eval_field, evaluate,
                                   field_extrema, parse_expr, unparse)


def test_literal():
    assert parse_expr("2.5") == Num(2.5)


@pytest.mark.parametrize("src,value", [
    ("2.5 + 0.1*sin(x)", 2.5),
    ("1 + 2*3", 7.0),
    ("2^3^2", 512.0),
    ("-2^2", 4.0),
    ("8/4/2", 1.0),
    ("10 - 4 - 3", 3.0),
    ("max(1, min(3, 2))", 2.0),
    ("sqrt(16) + abs(-3) + exp(0) + cos(0)", 9.0),
    ("pi", math.pi),
    (".5e1", 5.0),
])
def test_evaluation_at_origin(src, value):
    assert evaluate(parse_expr(src), {"x": 0.0, "y": 0.0}) == pytest.approx(value, abs=1e-15)


@pytest.mark.parametrize("src,offset", [("2*(x+", 5), ("", 0), ("1 +* 2", 3), ("sin(x", 5),
                                        ("(1))", 3), ("foo(1)", 0), ("2 $ 3", 2)])
def test_syntax_error_offset(src, offset):
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr(src)
    assert err.value.offset == offset
    assert err.value.expected


def test_wrong_arity():
    with pytest.raises(ExprSyntaxError):
        parse_expr("min(1)")
    with pytest.raises(ExprSyntaxError):
        parse_expr("sin(1, 2)")


def test_eval_field_examples():
    assert eval_field(ScalarField.parse("x^2+y"), (2, 1)) == 5.0
    assert eval_field(as_field(2.8), (0.3, -7)) == 2.8
    with pytest.raises(ExprEvalError) as err:
        eval_field(ScalarField.parse("1/x"), (0, 0))
    assert "x" in err.value.subexpr


@pytest.mark.parametrize("src", ["sqrt(x - 1)", "(x - 1)^0.5", "0^(-1)", "exp(1000*y + 1000)"])
def test_domain_errors_are_reported(src):
    with pytest.raises(ExprEvalError):
        eval_field(ScalarField.parse(src), (0.0, 0.0))


def test_field_broadcasts_constants():
    f = as_field(3.0)
    out = f(np.zeros((4, 3)), np.zeros((4, 3)))
    assert out.shape == (4, 3) and np.all(out == 3.0)
    out[0, 0] = 1.0  # a writable copy
    assert f.is_constant and not ScalarField.parse("x").is_constant


def test_field_extrema_examples():
    sq = DomainSpec("rect", 0, 0, math.pi, math.pi)
    assert field_extrema(2.5, sq) == (2.5, 2.5)
    lo, hi = field_extrema("2.5 + 0.1*sin(x)", sq, 101)
    assert lo == pytest.approx(2.5, abs=1e-3) and hi == pytest.approx(2.6, abs=1e-3)
    assert field_extrema("x", DomainSpec(), 2) == (0.0, 1.0)
    with pytest.raises(ValueError):
        field_extrema("x", DomainSpec(), 1)


def test_field_extrema_disc_restriction():
    d = DomainSpec("disc", cx=0, cy=0, radius=1)
    lo, hi = field_extrema("x", d, 201)
    assert lo == pytest.approx(-1) and hi == pytest.approx(1)
    lo, hi = field_extrema("x + y", d, 201)
    assert hi <= math.sqrt(2) + 1e-12 and hi > 1.35


def test_field_extrema_monotone_in_n():
    f = "sin(3*x) * cos(2*y)"
    d = DomainSpec("rect", 0, 0, 2, 2)
    prev_lo, prev_hi = field_extrema(f, d, 3)
    for n in (5, 9, 17, 33, 65):  # nested grids
        lo, hi = field_extrema(f, d, n)
        assert lo <= prev_lo and hi >= prev_hi
        prev_lo, prev_hi = lo, hi


def test_domain_validation():
    with pytest.raises(ValueError):
        DomainSpec("rect", 0, 0, 0, 1)
    with pytest.raises(ValueError):
        DomainSpec("disc", radius=0)
    with pytest.raises(ValueError):
        DomainSpec("square")


# --- property tests -------------------------------------------------------

nums = st.floats(min_value=0, max_value=50, allow_nan=False).map(lambda v: Num(round(v, 3)))
leaves = st.one_of(nums, st.sampled_from([Var("x"), Var("y")]))


def _extend(children):
    return st.one_of(
        st.builds(Neg, children),
        st.builds(BinOp, st.sampled_from("+-*/^"), children, children),
        st.builds(lambda a: Call("sin", (a,)), children),
        st.builds(lambda a, b: Call("max", (a, b)), children, children),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(trees)
def test_unparse_roundtrip(tree):
    again = parse_expr(unparse(tree))
    assert again == tree
    assert parse_expr(unparse(again)) == again


# minimal-parenthesis rendering following the documented precedence; the
# parser must recover the tree the text was rendered from
PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _render(node):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    op = node.op
    left, right = _render(node.left), _render(node.right)
    if isinstance(node.left, BinOp) and (PREC[node.left.op] < PREC[op]
                                         or (op == "^" and PREC[node.left.op] == 3)):
        left = f"({left})"
    if isinstance(node.right, BinOp) and (PREC[node.right.op] < PREC[op]
                                          or (PREC[node.right.op] == PREC[op] and op != "^")):
        right = f"({right})"
    return f"{left} {op} {right}"


def _reference(node):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return {"x": 1.25, "y": 0.75}[node.name]
    a, b = _reference(node.left), _reference(node.right)
    return {"+": a + b, "-": a - b, "*": a * b, "/": a / b, "^": a ** b}[node.op]


small = st.integers(1, 5).map(lambda v: Num(float(v)))
arith = st.recursive(st.one_of(small, st.sampled_from([Var("x"), Var("y")])),
                     lambda c: st.builds(BinOp, st.sampled_from("+-*/^"), c, c), max_leaves=6)


@settings(max_examples=300, deadline=None)
@given(arith)
def test_precedence_against_reference(tree):
    text = _render(tree)
    try:
        expected = _reference(tree)
    except (ZeroDivisionError, OverflowError, ValueError):
        return
    if isinstance(expected, complex) or not math.isfinite(expected):
        return
    assert parse_expr(text) == tree
    got = evaluate(parse_expr(text), {"x": 1.25, "y": 0.75})
    assert got == pytest.approx(expected, rel=1e-12)


def test_precedence_examples():
    assert parse_expr("a+b*c".replace("a", "x").replace("b", "y").replace("c", "2")) == \
        BinOp("+", Var("x"), BinOp("*", Var("y"), Num(2.0)))
    assert parse_expr("x^y^2") == BinOp("^", Var("x"), BinOp("^", Var("y"), Num(2.0)))


def test_evaluation_deterministic():
    f = ScalarField.parse("sin(x)*exp(y) + x^2.5")
    x = np.linspace(0, 1, 50)
    assert np.array_equal(f(x, x), f(x, x))
