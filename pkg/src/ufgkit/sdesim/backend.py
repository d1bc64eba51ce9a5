"""Kernel selection: the compiled extension when importable, else numpy.

Set ``UFGKIT_BACKEND=python`` to force the fallback; ``UFGKIT_THREADS``
caps OpenMP workers of the compiled kernel.
"""

from __future__ import annotations

import os

from . import _pykernel

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None


def available() -> list[str]:
    return (["compiled"] if _compiled is not None else []) + ["python"]


def _select(name: str | None = None):
    name = (name or os.environ.get("UFGKIT_BACKEND") or "").lower()
    if name == "python" or _compiled is None:
        if name == "compiled":
            raise ImportError("compiled kernel is not built")
        return "python", _pykernel.simulate
    return "compiled", _compiled.simulate


BACKEND, _simulate = _select()


def default_threads() -> int:
    env = os.environ.get("UFGKIT_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def simulate(table, x0s, snap_steps, dt, seed, path_start, n_paths, substeps=1, threads=None, backend=None):
    fn = _simulate if backend is None else _select(backend)[1]
    return fn(table, x0s, snap_steps, float(dt), int(seed), int(path_start), int(n_paths),
              int(substeps), int(threads or default_threads()))
