"""Exponential decay fits on a time grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .model import InsufficientPositiveValues

MIN_POINTS = 4


@dataclass(frozen=True)
class DecayEstimate:
    """Series ``values(t)`` with the fitted exponent of ``values ~ C exp(-exponent t)``."""

    times: tuple
    values: tuple
    fitted_exponent: float
    exponent_ci: tuple
    r_squared: float
    stderr: tuple | None = None
    intercept: float = float("nan")
    n_used: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        out = {
            "times": list(self.times),
            "values": list(self.values),
            "fitted_exponent": self.fitted_exponent,
            "exponent_ci": list(self.exponent_ci),
            "r_squared": self.r_squared,
            "n_used": self.n_used,
        }
        if self.stderr is not None:
            out["stderr"] = list(self.stderr)
        return out


def fit_decay(times, values, stderr=None, confidence: float = 0.95) -> DecayEstimate:
    """Least squares line through ``(t, log value)`` over the strictly positive values.

    The exponent is minus the slope; its interval is the two-sided Student-t
    interval at ``confidence``.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise ValueError("times and values must be matching 1-d sequences")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError("values must be finite and non-negative")
    keep = v > 0
    n = int(keep.sum())
    if n < MIN_POINTS:
        raise InsufficientPositiveValues(f"need {MIN_POINTS} positive values, got {n}")
    x, y = t[keep], np.log(v[keep])
    res = stats.linregress(x, y)
    resid = y - (res.intercept + res.slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    # identical logs: the mean itself may carry rounding, so test equality directly
    r2 = 1.0 if np.all(y == y[0]) or ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    half = stats.t.ppf(0.5 + confidence / 2.0, n - 2) * res.stderr
    exponent = 0.0 - float(res.slope)
    return DecayEstimate(
        tuple(float(a) for a in t),
        tuple(float(a) for a in v),
        exponent,
        (exponent - float(half), exponent + float(half)),
        r2,
        None if stderr is None else tuple(float(a) for a in stderr),
        float(res.intercept),
        n,
    )


def no_decay_estimate(times, values, stderr=None) -> DecayEstimate:
    """Estimate for an identically zero series: it vanishes at every rate."""
    inf = float("inf")
    return DecayEstimate(
        tuple(float(a) for a in times),
        tuple(float(a) for a in values),
        inf,
        (inf, inf),
        float("nan"),
        None if stderr is None else tuple(float(a) for a in stderr),
        float("-inf"),
        0,
    )
