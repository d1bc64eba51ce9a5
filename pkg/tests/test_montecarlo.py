import math

import numpy as np
import pytest

import oracles
from conftest import grusin_fields, ou_fields, vf
from ufgkit.sdesim.model import NonFinite, SdeModel
from ufgkit.sdesim.montecarlo import (
    check_reachability_contraction,
    directional_derivative,
    estimate_semigroup,
    estimate_semigroup_series,
    evaluate_gamma,
    integrate_path,
    mean_stderr,
    step_count,
)


@pytest.fixture
def ou():
    return SdeModel(ou_fields("-a*x"), {"a": 1.0}, "ou")


def scheme_second_moment(x0, dt, n):
    """E x_n^2 of the midpoint scheme for dX = -X dt + sqrt(2) dW: the step
    is x' = r x + c xi with r = 1 - dt + dt^2/2 and c^2 = 2 dt (1 - dt/2)^2."""
    r2, c2 = (1 - dt + dt * dt / 2) ** 2, 2 * dt * (1 - dt / 2) ** 2
    m = x0 * x0
    for _ in range(n):
        m = r2 * m + c2
    return m


def test_zero_fields_stay_put():
    model = SdeModel([vf(["0", "0"]), vf(["0", "0"])])
    x = np.array([0.25, -3.0])
    np.testing.assert_array_equal(integrate_path(model, x, 1.0, 0.01, seed=3), x)


def test_deterministic_component_follows_ode(grusin):
    end, traj = integrate_path(grusin, [1.0, 0.0], 1.0, 1e-3, seed=1, return_path=True)
    assert end[0] == pytest.approx(math.e, rel=1e-6)
    assert traj.shape == (1001, 2)


def test_step_count_validation():
    assert step_count(1.0, 1e-3) == 1000
    with pytest.raises(ValueError):
        step_count(1.0005, 1e-3)


def test_constant_and_initial_values(grusin):
    est = estimate_semigroup(grusin, "1", [1.0, 0.0], 1.0, 100, 0.01)
    assert est.mean == 1.0 and est.stderr == 0.0
    est = estimate_semigroup(grusin, "tanh(y)", [1.0, 0.4], 0.0, 100, 0.01)
    assert est.mean == math.tanh(0.4) and est.stderr == 0.0


@pytest.mark.parametrize("dt", [0.1, 0.05])
def test_ou_second_moment_matches_scheme(ou, dt):
    est = estimate_semigroup(ou, "x^2", [1.0], 1.0, 100000, dt, seed=2)
    want = scheme_second_moment(1.0, dt, round(1.0 / dt))
    assert abs(est.mean - want) < 3 * est.stderr
    exact = math.exp(-2.0) + 1 - math.exp(-2.0)
    assert abs(want - exact) < 2 * dt * dt


def test_semigroup_matches_oracle(grusin):
    times = [0.5, 1.0]
    est = estimate_semigroup_series(grusin, "tanh(y)", [1.0, 0.3], times, 20000, 1e-3, seed=5)
    for t, e in zip(times, est):
        want = oracles.grusin_semigroup(np.tanh, 1.0, 0.3, t)
        assert abs(e.mean - want) < 3 * e.stderr + 1e-4
        assert -1.0 <= e.mean <= 1.0


def test_derivative_matches_oracle(grusin):
    est = directional_derivative(grusin, "tanh(y)", [1.0, 0.0], 1.0, (1,), n_paths=20000, dt=1e-3, seed=7)
    want = oracles.grusin_v1_derivative(np.tanh, 1.0, 0.0, 1.0)
    assert abs(est.mean - want) < 3 * est.stderr + 1e-3


def test_common_noise_reduces_variance(grusin):
    # shared noise keeps the difference quotient small; independent noise would not
    est = directional_derivative(grusin, "tanh(y)", [1.0, 0.0], 0.5, (1,), n_paths=2000, dt=1e-2, seed=1)
    assert est.stderr < 0.05


def test_gamma_is_weighted_square(grusin):
    d = directional_derivative(grusin, "tanh(y)", [1.0, 0.0], 1.0, (1,), n_paths=4000, dt=1e-2, seed=9)
    g = evaluate_gamma(grusin, {(1,): 2.0}, {(1,): (1,)}, "tanh(y)", [1.0, 0.0], 1.0,
                       n_paths=4000, dt=1e-2, seed=9)
    assert g.value == pytest.approx(2.0 * d.mean**2, rel=1e-12)
    assert g.stderr == pytest.approx(4.0 * abs(d.mean) * d.stderr, rel=1e-9)
    with pytest.raises(ValueError):
        evaluate_gamma(grusin, {}, {}, "tanh(y)", [1.0, 0.0], 1.0)


def test_gamma_of_bracket_direction(grusin):
    # [V1, V0] = -k V1, so its weight-one term is the V1 term
    a = evaluate_gamma(grusin, {(1, 0): 1.0}, {(1, 0): (1, 0)}, "tanh(y)", [1.0, 0.0], 0.5,
                       n_paths=2000, dt=1e-2, seed=3)
    b = evaluate_gamma(grusin, {(1,): 1.0}, {(1,): (1,)}, "tanh(y)", [1.0, 0.0], 0.5,
                       n_paths=2000, dt=1e-2, seed=3)
    assert a.value == pytest.approx(b.value, rel=1e-6)


def test_empty_chain_has_nothing_to_contract(grusin):
    est = check_reachability_contraction(grusin, "tanh(y)", [1.0, 0.0], [], [0.5, 1.0, 1.5, 2.0],
                                         n_paths=100, dt=1e-2)
    assert est.fitted_exponent == math.inf
    assert est.extra["target"] == [1.0, 0.0]


def test_blowup_policy():
    model = SdeModel([vf(["x^2"]), vf(["1"])])
    with pytest.raises(NonFinite) as info:
        estimate_semigroup(model, "x", [0.5], 2.0, 400, 1e-2, seed=1)
    assert info.value.n_discarded > 0
    est = estimate_semigroup(model, "x", [0.5], 2.0, 400, 1e-2, seed=1, on_blowup="discard")
    assert est.n_discarded > 0 and est.n_paths + est.n_discarded == 400


def test_mean_stderr():
    assert mean_stderr(np.full(10, 0.1)) == (0.1, 0.0)
    m, se = mean_stderr(np.array([1.0, 3.0]))
    assert m == 2.0 and se == pytest.approx(1.0)
    with pytest.raises(ValueError):
        mean_stderr(np.array([1.0]))
