"""Monte Carlo estimators built on the path simulator.

Every estimator draws path ``i``'s noise from ``(seed, i)`` alone and
reduces with exactly rounded sums, so results do not depend on the chunk
size or the number of worker threads.  Paired quantities (derivatives,
reachability differences) use one noise stream for all start points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from ..exprparse import parse_function
from ..liealg import VectorField, bracket
from ..symexpr import Expr
from . import backend
from .fit import DecayEstimate, fit_decay, no_decay_estimate
from .flow import flow, flow_chain
from .model import NonFinite, SdeModel

DEFAULT_DT = 1e-3
DEFAULT_H = 1e-2
H_RANGE = (1e-4, 1e-1)
CHUNK = 8192


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n_paths: int
    seed: int
    n_discarded: int = 0

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n_paths": self.n_paths,
                "seed": self.seed, "n_discarded": self.n_discarded}


@dataclass(frozen=True)
class GammaEstimate:
    """Weighted sum of squared directional derivatives with a delta-method stderr."""

    value: float
    stderr: float
    terms: dict
    n_paths: int
    seed: int

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n_paths": self.n_paths, "seed": self.seed,
                "terms": {k: v.to_dict() for k, v in self.terms.items()}}


# helpers --------------------------------------------------------------------

def as_function(f, dim: int, params: Mapping[str, float] | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised callable from an expression string, an ``Expr`` or a callable."""
    if isinstance(f, str):
        g = parse_function(f, dim, params)
    elif isinstance(f, Expr):
        g = f.lambdify(params)
    elif callable(f):
        g = f
    else:
        raise TypeError(f"cannot evaluate test function {f!r}")

    def wrapped(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(g(x), dtype=float), x.shape[:-1])

    return wrapped


def resolve_field(model: SdeModel, direction) -> VectorField:
    """A direction given as a field or as a multi-index into the bracket hierarchy."""
    if isinstance(direction, VectorField):
        return direction.bind(model.params)
    alpha = tuple(int(i) for i in direction)
    if not alpha or any(i < 0 or i > model.d for i in alpha):
        raise ValueError(f"multi-index {alpha} invalid for {model.d} noise fields")
    v = model.fields[alpha[0]]
    for i in alpha[1:]:
        v = bracket(v, model.fields[i])
    return v.bind(model.params)


def step_count(t: float, dt: float) -> int:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t < 0:
        raise ValueError("times must be non-negative")
    n = int(round(t / dt))
    if abs(n * dt - t) > 1e-9 * max(1.0, t):
        raise ValueError(f"time {t} is not a multiple of dt={dt}")
    return n


def mean_stderr(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and standard error with exactly rounded summation."""
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    if n < 2:
        raise ValueError("need at least two samples")
    if np.all(v == v[0]):
        return float(v[0]), 0.0
    mean = math.fsum(v) / n
    var = math.fsum((v - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def _run(model: SdeModel, starts, times, n_paths: int, dt: float, seed: int, reduce,
         chunk: int = CHUNK, threads=None, backend_name=None):
    """Simulate all paths from ``starts`` (shared noise) in chunks.

    ``reduce`` maps states of shape ``(P, T, S, N)`` to per-path arrays;
    the per-path results and the blow-up mask are concatenated in path order.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if starts.shape[1] != model.dim:
        raise ValueError(f"start points must have {model.dim} coordinates")
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    steps = np.array([step_count(t, dt) for t in times], dtype=np.int64)
    if np.any(np.diff(steps) < 0):
        raise ValueError("times must be non-decreasing")
    parts, blown = [], []
    for p0 in range(0, n_paths, chunk):
        n = min(chunk, n_paths - p0)
        states, b = backend.simulate(model.table, starts, steps, dt, seed, p0, n,
                                     threads=threads, backend=backend_name)
        parts.append(reduce(states))
        blown.append(b)
    return np.concatenate(parts), np.concatenate(blown).astype(bool)


def _keep(values, blown, on_blowup: str):
    n_bad = int(blown.sum())
    if n_bad:
        if on_blowup == "raise":
            raise NonFinite(f"{n_bad} paths exceeded the blow-up guard", n_bad)
        values = values[~blown]
    return values, n_bad


# estimators -----------------------------------------------------------------

def integrate_path(model: SdeModel, x0, T: float, dt: float = DEFAULT_DT, seed: int = 0,
                   path: int = 0, return_path: bool = False):
    """Endpoint of one path (index ``path`` of the noise stream ``seed``)."""
    n = step_count(T, dt)
    snaps = np.arange(n + 1) if return_path else np.array([n])
    states, blown = backend.simulate(model.table, np.atleast_2d(x0), snaps, dt, seed, path, 1)
    if blown[0]:
        raise NonFinite("path exceeded the blow-up guard", 1)
    traj = states[0, :, 0, :]
    return (traj[-1].copy(), traj) if return_path else traj[-1].copy()


def estimate_semigroup_series(model: SdeModel, f, x, times: Sequence[float], n_paths: int = 10000,
                              dt: float = DEFAULT_DT, seed: int = 0, threads=None,
                              on_blowup: str = "raise", chunk: int = CHUNK) -> list[McEstimate]:
    """``E f(X_t)`` from ``X_0 = x`` for every ``t`` in ``times`` (one simulation)."""
    g = as_function(f, model.dim, model.params)
    vals, blown = _run(model, [x], times, n_paths, dt, seed, lambda s: g(s[:, :, 0, :]),
                       chunk, threads)
    vals, n_bad = _keep(vals, blown, on_blowup)
    out = []
    for k in range(len(times)):
        m, se = mean_stderr(vals[:, k])
        out.append(McEstimate(m, se, len(vals), seed, n_bad))
    return out


def estimate_semigroup(model: SdeModel, f, x, t: float, n_paths: int = 10000, dt: float = DEFAULT_DT,
                       seed: int = 0, threads=None, on_blowup: str = "raise") -> McEstimate:
    """Monte Carlo estimate of ``(P_t f)(x)``."""
    return estimate_semigroup_series(model, f, x, [t], n_paths, dt, seed, threads, on_blowup)[0]


def _check_h(h: float):
    if not H_RANGE[0] <= h <= H_RANGE[1]:
        raise ValueError(f"finite-difference step {h} outside [{H_RANGE[0]}, {H_RANGE[1]}]")


def derivative_samples(model: SdeModel, f, x, times: Sequence[float], directions: Sequence,
                       h: float = DEFAULT_H, n_paths: int = 10000, dt: float = DEFAULT_DT, seed: int = 0,
                       threads=None, on_blowup: str = "raise", chunk: int = CHUNK):
    """Per-path central differences along the flow of each direction.

    Returns ``(samples, n_discarded)`` with samples of shape
    ``(paths, len(directions), len(times))``.
    """
    _check_h(h)
    g = as_function(f, model.dim, model.params)
    x = np.asarray(x, dtype=float)
    starts = []
    for w in directions:
        v = resolve_field(model, w)
        starts.append(flow(v, x, h))
        starts.append(flow(v, x, -h))
    nd = len(directions)

    def reduce(states):
        vals = g(states)  # (P, T, 2*nd)
        diff = (vals[:, :, 0::2] - vals[:, :, 1::2]) / (2.0 * h)
        return np.transpose(diff, (0, 2, 1))

    samples, blown = _run(model, starts, times, n_paths, dt, seed, reduce, chunk, threads)
    return _keep(samples, blown, on_blowup)


def directional_derivative_series(model: SdeModel, f, x, times: Sequence[float], direction,
                                  h: float = DEFAULT_H, n_paths: int = 10000, dt: float = DEFAULT_DT,
                                  seed: int = 0, threads=None, on_blowup: str = "raise") -> list[McEstimate]:
    samples, n_bad = derivative_samples(model, f, x, times, [direction], h, n_paths, dt, seed,
                                        threads, on_blowup)
    return [McEstimate(*mean_stderr(samples[:, 0, k]), len(samples), seed, n_bad)
            for k in range(len(times))]


def directional_derivative(model: SdeModel, f, x, t: float, direction, h: float = DEFAULT_H,
                           n_paths: int = 10000, dt: float = DEFAULT_DT, seed: int = 0,
                           threads=None, on_blowup: str = "raise") -> McEstimate:
    """Estimate of ``(W P_t f)(x)`` by a central difference along the flow of ``W``
    with common random numbers for both end points."""
    return directional_derivative_series(model, f, x, [t], direction, h, n_paths, dt, seed,
                                         threads, on_blowup)[0]


def squared_derivative_decay(model: SdeModel, f, x, direction, times: Sequence[float],
                             h: float = DEFAULT_H, n_paths: int = 10000, dt: float = DEFAULT_DT,
                             seed: int = 0, threads=None) -> DecayEstimate:
    """Fit of ``|W P_t f(x)|^2`` over ``times``; stderr by the delta method."""
    est = directional_derivative_series(model, f, x, times, direction, h, n_paths, dt, seed, threads)
    values = [e.mean**2 for e in est]
    errs = [2.0 * abs(e.mean) * e.stderr for e in est]
    return fit_decay(times, values, errs)


def _gamma_from_samples(weights: np.ndarray, samples: np.ndarray, labels, seed: int, n_bad: int):
    """``sum_a w_a mean_a^2`` and its delta-method stderr from per-path samples ``(P, A)``."""
    n = samples.shape[0]
    terms, means = {}, []
    for j, lab in enumerate(labels):
        m, se = mean_stderr(samples[:, j])
        terms[lab] = McEstimate(m, se, n, seed, n_bad)
        means.append(m)
    means = np.array(means)
    value = math.fsum(weights * means**2)
    grad = 2.0 * weights * means
    if np.any(grad != 0.0):
        proj = samples @ grad
        _, se = mean_stderr(proj)
    else:
        se = 0.0
    return GammaEstimate(value, se, terms, n, seed)


def evaluate_gamma_series(model: SdeModel, a, fields: Mapping, f, x, times: Sequence[float],
                          h: float = DEFAULT_H, n_paths: int = 10000, dt: float = DEFAULT_DT, seed: int = 0,
                          threads=None, on_blowup: str = "raise") -> list[GammaEstimate]:
    """``sum_alpha a_alpha (V_alpha P_t f)(x)^2`` at each time, one noise stream for all directions.

    ``fields`` maps keys (multi-indices or labels) to directions; ``a[key]``
    gives the weight.
    """
    keys = list(fields)
    if not keys:
        raise ValueError("basis must be nonempty")
    weights = np.array([float(a[k]) for k in keys])
    samples, n_bad = derivative_samples(model, f, x, times, [fields[k] for k in keys], h, n_paths,
                                        dt, seed, threads, on_blowup)
    return [_gamma_from_samples(weights, samples[:, :, k], keys, seed, n_bad) for k in range(len(times))]


def evaluate_gamma(model: SdeModel, a, fields: Mapping, f, x, t: float, h: float = DEFAULT_H,
                   n_paths: int = 10000, dt: float = DEFAULT_DT, seed: int = 0, threads=None,
                   on_blowup: str = "raise") -> GammaEstimate:
    return evaluate_gamma_series(model, a, fields, f, x, [t], h, n_paths, dt, seed, threads, on_blowup)[0]


def reachable_point(model: SdeModel, x, chain) -> np.ndarray:
    """End point of a chain ``[(direction, duration), ...]`` of integral curves."""
    resolved = [(resolve_field(model, w), float(s)) for w, s in chain]
    return flow_chain(resolved, x)


def check_reachability_contraction(model: SdeModel, f, x, chain, times: Sequence[float],
                                   n_paths: int = 10000, dt: float = DEFAULT_DT, seed: int = 0,
                                   threads=None) -> DecayEstimate:
    """Fit of ``|P_t f(x) - P_t f(y)|`` for ``y`` reached from ``x`` along ``chain``."""
    g = as_function(f, model.dim, model.params)
    x = np.asarray(x, dtype=float)
    y = reachable_point(model, x, chain)
    samples, blown = _run(model, [x, y], times, n_paths, dt, seed,
                          lambda s: g(s[:, :, 0, :]) - g(s[:, :, 1, :]), CHUNK, threads)
    samples, n_bad = _keep(samples, blown, "raise")
    means, errs = [], []
    for k in range(len(times)):
        m, se = mean_stderr(samples[:, k])
        means.append(abs(m))
        errs.append(se)
    if all(v == 0.0 for v in means):
        est = no_decay_estimate(times, means, errs)
    else:
        est = fit_decay(times, means, errs)
    est.extra["target"] = [float(c) for c in y]
    return est
