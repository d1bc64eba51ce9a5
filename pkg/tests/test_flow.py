import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import vf
from ufgkit.sdesim.flow import MAX_TIME, flow, flow_chain
from ufgkit.sdesim.model import NonFinite


def test_constant_field_is_exact():
    v = vf(["0", "0", "1"])
    assert flow(v, [0.0, 0.0, 3.0], 0.7)[2] == 3.7


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-2, 2))
def test_linear_decay(x0, h):
    got = flow(vf(["-x"]), [x0], h)[0]
    assert got == pytest.approx(x0 * math.exp(-h), rel=1e-8, abs=1e-12)


def test_zero_time_is_identity():
    x = np.array([0.3, -1.2])
    np.testing.assert_array_equal(flow(vf(["x*y", "sin(y)"]), x, 0.0), x)


def test_forward_then_backward():
    v = vf(["y", "-sin(x)"])
    x = np.array([0.4, 0.1])
    np.testing.assert_allclose(flow(v, flow(v, x, 1.3), -1.3), x, atol=1e-10)


def test_fourth_order_convergence():
    v = vf(["-x*x"])
    exact = 1.0 / (1.0 + 2.0)  # x' = -x^2, x(0) = 1, t = 2
    steps = [0.2, 0.1, 0.05, 0.025]
    errs = [abs(flow(v, [1.0], 2.0, max_substep=s)[0] - exact) for s in steps]
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert 3.7 <= slope <= 4.3


def test_time_guard():
    with pytest.raises(ValueError):
        flow(vf(["x"]), [1.0], MAX_TIME * 1.01)


def test_blowup_reported():
    with pytest.raises(NonFinite):
        flow(vf(["x^3"]), [10.0], 9.0)


def test_chain_composes():
    chain = [(vf(["1", "0"]), 1.0), (vf(["0", "x"]), 2.0)]
    np.testing.assert_allclose(flow_chain(chain, [0.0, 0.0]), [1.0, 2.0], atol=1e-12)
    np.testing.assert_array_equal(flow_chain([], [0.5, 0.5]), [0.5, 0.5])
