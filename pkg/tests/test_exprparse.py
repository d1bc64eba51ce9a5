import numpy as np
import pytest

from ufgkit.exprparse import ExprSyntaxError, UnknownVariableError, coordinate_names, parse_expr, parse_function
from ufgkit.symexpr import Expr


def test_coordinate_aliases():
    assert coordinate_names(2) == {"x1": 0, "x2": 1, "x": 0, "y": 1}
    assert "x" not in coordinate_names(4)


def test_parse_polynomial_with_params():
    e = parse_expr("-2*k*z + x^2*y", 3, ["k"])
    x, y, z = (Expr.var(i, 3) for i in range(3))
    assert e == -2 * Expr.param("k", 3) * z + x * x * y


def test_parse_trig_and_power():
    e = parse_expr("sin(x)*cos(x)^2", 2)
    assert e == Expr.sin(0, 2) * Expr.cos(0, 2) ** 2


def test_unknown_variable_has_column():
    with pytest.raises(UnknownVariableError) as err:
        parse_expr("sin(w)", 2)
    assert err.value.column == 5


@pytest.mark.parametrize("text", ["x +* 2", "sin(x*y)", "tanh(x)", "x / y", "(x", ""])
def test_symbolic_rejections(text):
    with pytest.raises(ExprSyntaxError):
        parse_expr(text, 2)


def test_numeric_functions():
    f = parse_function("tanh(y) + exp(-abs(x)) * sqrt(2)", 2)
    pts = np.array([[0.5, -1.0], [0.0, 2.0]])
    want = np.tanh(pts[:, 1]) + np.exp(-np.abs(pts[:, 0])) * np.sqrt(2)
    np.testing.assert_allclose(f(pts), want)
    assert f.source.startswith("tanh")


def test_numeric_parameters():
    f = parse_function("k*x", 1, {"k": 3.0})
    assert f(np.array([2.0])) == pytest.approx(6.0)
