import math
import random

import numpy as np
import pytest

from blochgap.errors import InputError, ParseError
from blochgap.expressions import (BinOp, Call, Name, Num, Pow, evaluate,
                                  parse, to_string)


def test_basic_evaluation():
    x = np.linspace(0.05, 0.95, 7)
    np.testing.assert_allclose(evaluate(parse("sin(pi*x1)"), x), np.sin(math.pi * x))
    got = evaluate(parse("2*sin(pi*x1)*sin(2*pi*x1)"), x)
    np.testing.assert_allclose(got, 2 * np.sin(math.pi * x) * np.sin(2 * math.pi * x),
                               atol=1e-12)


def test_precedence_and_power():
    assert evaluate(parse("1+2*3^2"), 0.0) == pytest.approx(19.0)
    assert evaluate(parse("2^3"), 0.0) == pytest.approx(8.0)
    assert evaluate(parse("(1+2)*3"), 0.0) == pytest.approx(9.0)
    assert evaluate(parse("2-1-1"), 0.0) == pytest.approx(0.0)
    assert evaluate(parse("cos(0)^2"), 0.0) == pytest.approx(1.0)


def test_two_variable_profiles():
    tree = parse("x1*cos(x2)+x2^2")
    assert evaluate(tree, 2.0, 0.0) == pytest.approx(2.0)
    with pytest.raises(InputError):
        evaluate(tree, 2.0)  # x2 unavailable for a 1d cross-section


def test_syntax_error_offsets():
    with pytest.raises(ParseError) as err:
        parse("sin(x1")
    assert err.value.offset == 6  # end of input, missing ')'
    with pytest.raises(ParseError) as err:
        parse("x1 + * 2")
    assert err.value.offset == 5
    with pytest.raises(ParseError) as err:
        parse("sin(pi*x3)")
    assert err.value.offset == 7
    assert "unknown identifier" in str(err.value)
    with pytest.raises(ParseError):
        parse("x1^2^3")  # a factor takes a single integer exponent
    with pytest.raises(ParseError):
        parse("x1^(2)")
    with pytest.raises(ParseError):
        parse("1 ? 2")
    with pytest.raises(ParseError):
        parse("")


def test_round_trip_fixed_cases():
    cases = [
        "sin(pi*x1)",
        "2*sin(pi*x1)*sin(2*pi*x1)",
        "1+2*3^2",
        "x1-x2-1",
        "x1-(x2-1)",
        "(x1+x2)^3*cos(pi*x2)",
        "0.001*x1",
    ]
    for text in cases:
        tree = parse(text)
        assert parse(to_string(tree)) == tree


def _random_tree(rng, depth):
    if depth <= 0 or rng.random() < 0.3:
        choice = rng.randrange(4)
        if choice == 0:
            return Num(round(rng.uniform(0.0, 9.0), 3))
        if choice == 1:
            return Name("pi")
        if choice == 2:
            return Name("x1")
        return Name("x2")
    choice = rng.randrange(6)
    if choice == 0:
        return Call("sin", _random_tree(rng, depth - 1))
    if choice == 1:
        return Call("cos", _random_tree(rng, depth - 1))
    if choice == 2:
        # grammar restriction: the base of a power is an atom
        base = _random_tree(rng, 0)
        return Pow(base, rng.randrange(0, 4))
    op = "+-*"[rng.randrange(3)]
    return BinOp(op, _random_tree(rng, depth - 1), _random_tree(rng, depth - 1))


def _eval_oracle(node, x1, x2):
    """Independent scalar evaluator used as the reference."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        return {"pi": math.pi, "x1": x1, "x2": x2}[node.ident]
    if isinstance(node, Call):
        fn = math.sin if node.func == "sin" else math.cos
        return fn(_eval_oracle(node.arg, x1, x2))
    if isinstance(node, Pow):
        return _eval_oracle(node.base, x1, x2) ** node.exponent
    a = _eval_oracle(node.left, x1, x2)
    b = _eval_oracle(node.right, x1, x2)
    return {"+": a + b, "-": a - b, "*": a * b}[node.op]


def test_random_trees_round_trip_and_match_oracle():
    rng = random.Random(20240817)
    for _ in range(1000):
        tree = _random_tree(rng, 4)
        assert parse(to_string(tree)) == tree
        x1, x2 = rng.uniform(0, 2), rng.uniform(0, 2)
        expected = _eval_oracle(tree, x1, x2)
        got = float(evaluate(tree, x1, x2))
        assert got == pytest.approx(expected, rel=1e-14, abs=1e-14)


def test_scientific_notation_numbers():
    tree = parse("1e-3*x1")
    assert evaluate(tree, 2.0, 0.0) == pytest.approx(0.002)
    assert parse(to_string(tree)) == tree
