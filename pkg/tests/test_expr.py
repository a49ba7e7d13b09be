import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from constrank.errors import ParameterRangeError, ParseError
from constrank.expr import BinOp, Call, Neg, Num, Param, Pow, has_division, max_param, parse, to_text
from constrank.jets import eval_value


def test_precedence_root_is_plus():
    node = parse("cos(a1)*2 + a2^3", 2)
    assert isinstance(node, BinOp) and node.op == "+"
    assert node.left == BinOp("*", Call("cos", Param(1)), Num(2.0))
    assert node.right == Pow(Param(2), 3)


def test_parameter_out_of_range():
    with pytest.raises(ParameterRangeError, match="parameter out of range"):
        parse("a3", 2)


def test_unclosed_call_offset():
    with pytest.raises(ParseError) as info:
        parse("sin(a1", 1)
    assert info.value.offset == 7


@pytest.mark.parametrize("text, offset", [
    ("a1 +", 5),
    ("2 ** a1", 4),
    ("foo(a1)", 1),
    ("a1 $ 2", 4),
    ("a1^a1", 4),
    ("a1^1.5", 4),
])
def test_syntax_error_offsets(text, offset):
    with pytest.raises(ParseError) as info:
        parse(text, 1)
    assert info.value.offset == offset


def test_unary_minus_binds_looser_than_power():
    assert parse("-a1^2", 1) == Neg(Pow(Param(1), 2))
    assert eval_value(parse("-a1^2", 1), [3.0]) == -9.0


def test_negative_and_parenthesized_exponents():
    assert parse("a1^-2", 1) == Pow(Param(1), -2)
    assert parse("a1^(-2)", 1) == Pow(Param(1), -2)


def test_pi_and_scientific_literals():
    assert eval_value(parse("pi/2", 1), [0.0]) == pytest.approx(math.pi / 2)
    assert eval_value(parse("1.5e-3*a1", 1), [2.0]) == pytest.approx(3e-3)


def test_left_associativity():
    assert eval_value(parse("8/4/2", 1), [0.0]) == 1.0
    assert eval_value(parse("1-2-3", 1), [0.0]) == -4.0


def test_helpers():
    node = parse("a2/(1+a1)", 3)
    assert has_division(node)
    assert max_param(node) == 2
    assert not has_division(parse("sin(a1)*a1", 1))


def test_print_canonical_examples():
    assert to_text(parse("-a1^2", 1)) == to_text(parse("-(a1^2)", 1))
    assert parse(to_text(parse("(a1 - (a1 - 1))", 1)), 1) == parse("a1 - (a1 - 1)", 1)


# ---- round-trip property -------------------------------------------------

leaf = st.one_of(
    st.integers(1, 3).map(Param),
    st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False).map(lambda x: Num(abs(x))),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: BinOp(*t)),
        children.map(Neg),
        st.tuples(children, st.integers(-4, 4)).map(lambda t: Pow(*t)),
        st.tuples(st.sampled_from(["sin", "cos", "tan", "exp", "log", "sqrt"]), children)
        .map(lambda t: Call(*t)),
    )


trees = st.recursive(leaf, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(trees)
def test_parse_print_parse_is_identity(tree):
    once = parse(to_text(tree), 3)
    assert parse(to_text(once), 3) == once
    assert to_text(once) == to_text(tree)


def test_roundtrip_on_random_structural_trees():
    from synth import random_expr

    rng = np.random.default_rng(5)
    for _ in range(200):
        tree = random_expr(rng, 3, 5)
        assert parse(to_text(tree), 3) == parse(to_text(parse(to_text(tree), 3)), 3)
