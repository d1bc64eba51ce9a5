import numpy as np
import pytest

from conftest import grusin_fields, heisenberg_fields, ou_fields, vf
from ufgkit.sdesim import _pykernel, backend
from ufgkit.sdesim.model import SdeModel, compile_fields
from ufgkit.sdesim.montecarlo import estimate_semigroup_series

needs_compiled = pytest.mark.skipif("compiled" not in backend.available(),
                                    reason="compiled kernel not built")

CASES = [
    (ou_fields("-a*x"), {"a": 1.0}, [[0.3]]),
    (grusin_fields(), {"k": 1.0}, [[1.0, 0.0], [0.5, -0.2]]),
    (heisenberg_fields(), {"k": 1.0}, [[0.5, 0.5, 0.0]]),
    ([vf(["sin(x)*y^2", "cos(y)"]), vf(["0", "sin(x)"]), vf(["x", "0"]), vf(["1", "y"])], {}, [[0.1, 0.2]]),
]


@pytest.mark.parametrize("fields,params,starts", CASES)
def test_field_evaluation_matches_symbolic(fields, params, starts, rng):
    table = compile_fields(fields, params)
    x = rng.normal(size=(7, 1, fields[0].dim))
    got = _pykernel.eval_fields(table, x)
    for f, v in enumerate(fields):
        want = [v.bind(params).evaluate(p) for p in x[:, 0, :]]
        np.testing.assert_allclose(got[:, 0, f, :], want, rtol=1e-13, atol=1e-13)


@needs_compiled
@pytest.mark.parametrize("fields,params,starts", CASES)
@pytest.mark.parametrize("substeps", [1, 3])
def test_backends_agree(fields, params, starts, substeps):
    table = compile_fields(fields, params)
    snaps = np.array([0, 5, 20])
    args = (table, np.array(starts, float), snaps, 0.01, 17, 40, 64, substeps)
    a, ba = backend.simulate(*args, backend="compiled")
    b, bb = backend.simulate(*args, backend="python")
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(ba, bb)


@needs_compiled
def test_thread_count_does_not_change_paths():
    table = compile_fields(heisenberg_fields(), {"k": 1.0})
    args = (table, np.array([[0.5, 0.5, 0.0]]), np.array([50]), 0.01, 3, 0, 300)
    one, _ = backend.simulate(*args, threads=1, backend="compiled")
    many, _ = backend.simulate(*args, threads=4, backend="compiled")
    np.testing.assert_array_equal(one, many)


def test_path_noise_depends_only_on_index():
    table = compile_fields(grusin_fields(), {"k": 1.0})
    start = np.array([[1.0, 0.0]])
    whole, _ = backend.simulate(table, start, np.array([30]), 0.01, 8, 0, 40)
    tail, _ = backend.simulate(table, start, np.array([30]), 0.01, 8, 25, 15)
    np.testing.assert_array_equal(whole[25:], tail)


def test_chunking_is_invisible(grusin):
    times = [0.1, 0.2]
    a = estimate_semigroup_series(grusin, "tanh(y)", [1.0, 0.0], times, 1000, 0.01, 4)
    b = estimate_semigroup_series(grusin, "tanh(y)", [1.0, 0.0], times, 1000, 0.01, 4, chunk=96)
    assert [e.mean for e in a] == [e.mean for e in b]


def test_blowup_guard_marks_paths():
    table = compile_fields([vf(["x^3"]), vf(["0"])])
    states, blown = backend.simulate(table, np.array([[2.0]]), np.array([200]), 0.01, 0, 0, 3)
    assert blown.all()
    assert np.all(np.isfinite(states))


def test_python_fallback_selectable(monkeypatch):
    name, fn = backend._select("python")
    assert name == "python" and fn is _pykernel.simulate
