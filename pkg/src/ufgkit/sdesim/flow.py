"""Integral curves of vector fields by classical fourth-order Runge-Kutta."""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from ..liealg import VectorField
from ._pykernel import eval_fields
from .model import NonFinite, compile_fields

MAX_TIME = 10.0
MAX_SUBSTEP = 1e-2


def field_function(v: VectorField, params: Mapping[str, float] | None = None):
    """Vectorised evaluator of a bound field on ``(..., N)`` arrays."""
    table = compile_fields([v], params)
    return lambda x: eval_fields(table, x)[..., 0, :]


def flow(v: VectorField, x, h: float, params: Mapping[str, float] | None = None,
         max_substep: float = MAX_SUBSTEP) -> np.ndarray:
    """Point reached from ``x`` after time ``h`` along the integral curve of ``v``.

    ``x`` may hold several points along its leading axes.  The interval is
    cut into equal substeps no longer than ``max_substep``.
    """
    h = float(h)
    if not abs(h) <= MAX_TIME:
        raise ValueError(f"flow time {h} outside [-{MAX_TIME}, {MAX_TIME}]")
    if max_substep <= 0:
        raise ValueError("max_substep must be positive")
    y = np.array(x, dtype=float)
    if h == 0.0:
        return y
    bound = v.bind(params or {})
    if all(c.is_number() for c in bound.components):
        # straight line: one exact step avoids accumulated rounding
        return y + h * np.array([float(c.number()) for c in bound.components])
    rhs = field_function(v, params)
    n = max(1, math.ceil(abs(h) / max_substep - 1e-12))
    s = h / n
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * s * k1)
            k3 = rhs(y + 0.5 * s * k2)
            k4 = rhs(y + s * k3)
            y = y + (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise NonFinite(f"flow left the finite region after time {h}")
    return y


def flow_chain(chain, x, params: Mapping[str, float] | None = None,
               max_substep: float = MAX_SUBSTEP) -> np.ndarray:
    """Compose flows ``[(field, duration), ...]`` starting from ``x``."""
    y = np.array(x, dtype=float)
    for v, duration in chain:
        y = flow(v, y, duration, params, max_substep)
    return y
