from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from ufgkit.symexpr import (
    COS,
    SIN,
    Expr,
    ExprError,
    UnboundParameterError,
    differentiate,
    evaluate,
    is_bounded,
    is_zero,
    reduce_trig,
    signed_sup,
    sup_norm,
)

DIM = 3
X, Y, Z = (Expr.var(i, DIM) for i in range(DIM))
K = Expr.param("k", DIM)
SYMS = sp.symbols("x0 x1 x2")
KSYM = sp.Symbol("k")


def to_sympy(e: Expr):
    out = 0
    for t in e.terms:
        v = sp.Rational(t.coeff) if isinstance(t.coeff, Fraction) else sp.Float(t.coeff)
        for i, p in t.coords:
            v *= SYMS[i] ** p
        for name, p in t.params:
            v *= sp.Symbol(name) ** p
        for i, kind, p in t.trig:
            v *= (sp.sin if kind == SIN else sp.cos)(SYMS[i]) ** p
        out += v
    return out


@st.composite
def exprs(draw, max_terms=4):
    n = draw(st.integers(0, max_terms))
    terms = []
    for _ in range(n):
        c = Fraction(draw(st.integers(-5, 5)), draw(st.integers(1, 3)))
        coords = tuple((i, p) for i, p in enumerate(draw(st.lists(st.integers(0, 2), min_size=DIM, max_size=DIM))) if p)
        params = (("k", draw(st.integers(1, 2))),) if draw(st.booleans()) else ()
        trig = []
        for i in range(DIM):
            s, c2 = draw(st.integers(0, 2)), draw(st.integers(0, 2))
            if s:
                trig.append((i, SIN, s))
            if c2:
                trig.append((i, COS, c2))
        terms.append(((coords, params, tuple(trig)), c))
    return Expr(terms, DIM)


def test_canonical_merge_and_drop():
    e = X * Y + Y * X - 2 * (X * Y)
    assert e.is_structurally_zero()
    assert (X + Y) == (Y + X)
    assert hash(X + Y) == hash(Y + X)


def test_constants_and_numbers():
    c = Expr.const(Fraction(3, 2), DIM)
    assert c.is_number() and c.number() == Fraction(3, 2)
    assert (K * 2).is_constant() and not (K * 2).is_number()
    assert Expr.zero(DIM).number() == 0


def test_division_only_by_numbers():
    assert (X / 2) == X * Fraction(1, 2)
    with pytest.raises((ExprError, TypeError)):
        X / Y


def test_power():
    assert (X + 1) ** 2 == X * X + 2 * X + 1
    assert (X + 1) ** 0 == Expr.const(1, DIM)


def test_differentiate_trig_and_params():
    e = K * Expr.sin(0, DIM) * X
    assert differentiate(e, 0) == K * Expr.cos(0, DIM) * X + K * Expr.sin(0, DIM)
    assert differentiate(K, 0).is_structurally_zero()
    with pytest.raises(IndexError):
        differentiate(X, 5)


@settings(max_examples=60, deadline=None)
@given(exprs(), st.integers(0, DIM - 1))
def test_derivative_matches_sympy(e, i):
    got = to_sympy(differentiate(e, i))
    want = sp.diff(to_sympy(e), SYMS[i])
    assert sp.simplify(sp.expand(got - want)) == 0


@settings(max_examples=60, deadline=None)
@given(exprs(), exprs())
def test_product_matches_sympy(a, b):
    assert sp.expand(to_sympy(a * b) - to_sympy(a) * to_sympy(b)) == 0


@settings(max_examples=60, deadline=None)
@given(exprs(), exprs(), exprs())
def test_ring_laws(a, b, c):
    assert a + b == b + a
    assert (a + b) + c == a + (b + c)
    assert a * (b + c) == a * b + a * c
    assert (a * b) * c == a * (b * c)
    assert (a - a).is_structurally_zero()


@settings(max_examples=40, deadline=None)
@given(exprs(), st.integers(0, DIM - 1), st.integers(0, DIM - 1))
def test_derivatives_commute(e, i, j):
    assert differentiate(differentiate(e, i), j) == differentiate(differentiate(e, j), i)


@settings(max_examples=40, deadline=None)
@given(exprs(), st.lists(st.floats(-2, 2), min_size=DIM, max_size=DIM))
def test_evaluate_matches_lambdify(e, pt):
    params = {"k": 1.3}
    assert evaluate(e, pt, params) == pytest.approx(float(e.lambdify(params)(np.array(pt))), abs=1e-9, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(exprs())
def test_reduce_trig_preserves_values(e):
    pts = np.random.default_rng(0).uniform(-2, 2, (8, DIM))
    f, g = e.lambdify({"k": 0.7}), reduce_trig(e).lambdify({"k": 0.7})
    np.testing.assert_allclose(f(pts), g(pts), atol=1e-9, rtol=1e-9)


def test_pythagorean_zero():
    s, c = Expr.sin(0, DIM), Expr.cos(0, DIM)
    chk = is_zero(s * s + c * c - 1)
    assert chk.zero and not chk.structural and chk.flagged
    assert bool(chk)
    assert not is_zero(s)


def test_unbound_parameter():
    with pytest.raises(UnboundParameterError):
        evaluate(K * X, [1, 1, 1])
    assert evaluate(K * X, [2, 0, 0], {"k": 3}) == 6


def test_boundedness_and_sups():
    s = Expr.sin(0, DIM)
    assert is_bounded(2 * s + 3) and not is_bounded(X * s)
    assert sup_norm(-K, params={"k": 2}) == (2.0, True)
    assert sup_norm(X * s)[0] == float("inf")
    assert sup_norm(2 * s - 1)[0] == 3.0
    assert signed_sup(-Expr.cos(0, DIM)) == 1.0
    assert signed_sup(-K, {"k": 1}) == -1.0
    assert signed_sup(X) == float("inf")


def test_sup_norm_on_box():
    val, exact = sup_norm(X * X, domain=[(-1, 1)] * 3, resolution=5)
    assert not exact and val == pytest.approx(1.1)


def test_to_string_roundtrip_names():
    e = 2 * X * Y - K
    s = e.to_string()
    assert "x" in s and "y" in s and "k" in s
