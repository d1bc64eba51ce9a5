"""Vectorised numpy implementation of the path simulator (fallback backend)."""

from __future__ import annotations

import numpy as np

from .rng import normals

BLOWUP = 1e12


def _ipow(base: np.ndarray, p: int) -> np.ndarray:
    out = np.ones_like(base)
    for _ in range(p):
        out = out * base
    return out


def eval_fields(table, x: np.ndarray) -> np.ndarray:
    """Field values at states ``x`` of shape ``(..., N)``; returns ``(..., F, N)``."""
    n, nf = table.dim, table.n_fields
    out = np.zeros(x.shape[:-1] + (nf, n))
    if table.uses_trig:
        sx, cx = np.sin(x), np.cos(x)
    for f in range(nf):
        for i in range(n):
            lo, hi = table.offsets[f * n + i], table.offsets[f * n + i + 1]
            acc = out[..., f, i]
            for t in range(lo, hi):
                v = np.full(x.shape[:-1], table.coeff[t])
                for k in range(n):
                    if table.pw[t, k]:
                        v = v * _ipow(x[..., k], int(table.pw[t, k]))
                    if table.sinp[t, k]:
                        v = v * _ipow(sx[..., k], int(table.sinp[t, k]))
                    if table.cosp[t, k]:
                        v = v * _ipow(cx[..., k], int(table.cosp[t, k]))
                acc += v
    return out


def _increment(v, dw, dt, sq):
    acc = v[..., 0, :] * dt
    for j in range(dw.shape[1]):
        acc = acc + sq * v[..., j + 1, :] * dw[:, j, None, None]
    return acc


def simulate(table, x0s, snap_steps, dt, seed, path_start, n_paths, substeps=1, threads=1):
    """Midpoint Stratonovich scheme for ``n_paths`` paths from every start in
    ``x0s`` (shared noise).  Returns ``(states, blown)`` with states of shape
    ``(n_paths, n_snap, S, N)``."""
    x0s = np.ascontiguousarray(x0s, dtype=np.float64)
    snap_steps = np.asarray(snap_steps, dtype=np.int64)
    s_count, n = x0s.shape
    d = table.n_fields - 1
    n_steps = int(snap_steps.max()) if len(snap_steps) else 0
    out = np.empty((n_paths, len(snap_steps), s_count, n))
    blown = np.zeros(n_paths, dtype=np.uint8)
    x = np.broadcast_to(x0s, (n_paths, s_count, n)).copy()
    paths = np.arange(path_start, path_start + n_paths, dtype=np.uint64)
    sq = np.sqrt(2.0)
    sub_scale = np.sqrt(dt / substeps)
    snap_idx = 0
    while snap_idx < len(snap_steps) and snap_steps[snap_idx] == 0:
        out[:, snap_idx] = x
        snap_idx += 1
    for step in range(n_steps):
        dw = np.zeros((n_paths, d))
        if d:
            for sub in range(substeps):
                dw += normals(seed, paths, step * substeps + sub, d)
            dw *= sub_scale
        live = blown == 0
        v = eval_fields(table, x)
        mid = 0.5 * (x + (x + _increment(v, dw, dt, sq)))
        v = eval_fields(table, mid)
        new = x + _increment(v, dw, dt, sq)
        bad = ~np.all(np.isfinite(new) & (np.abs(new) <= BLOWUP), axis=(1, 2))
        newly = live & bad
        blown[newly] = 1
        upd = live & ~bad
        x[upd] = new[upd]
        while snap_idx < len(snap_steps) and snap_steps[snap_idx] == step + 1:
            out[:, snap_idx] = x
            snap_idx += 1
    return out, blown
