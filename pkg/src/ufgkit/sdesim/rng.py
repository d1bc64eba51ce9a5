"""Philox4x32-10 counter-based generator and Box-Muller normals (numpy).

The compiled kernel implements the same function bit for bit, so a
path's noise depends only on ``(seed, path index, step, substep)``.
Each path consumes one stream of normals; draw ``q`` (counted over steps,
substeps and noise channels) is component ``q % 2`` of the Box-Muller pair
with counter ``(pair low, pair high, path low, path high)``, ``pair = q // 2``;
key: ``(seed low, seed high)``.
"""

from __future__ import annotations

import numpy as np

M0 = np.uint64(0xD2511F53)
M1 = np.uint64(0xCD9E8D57)
W0 = 0x9E3779B9
W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)
ROUNDS = 10


def philox4x32(counter, key) -> tuple[np.ndarray, ...]:
    """Vectorised Philox4x32-10.  ``counter`` is a 4-tuple and ``key`` a 2-tuple
    of uint32 arrays (broadcastable); returns four uint32 arrays."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint32) for c in counter)
    k0, k1 = (int(k) & 0xFFFFFFFF for k in key)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    for r in range(ROUNDS):
        p0 = M0 * c0.astype(np.uint64)
        p1 = M1 * c2.astype(np.uint64)
        hi0 = (p0 >> _SHIFT).astype(np.uint32)
        lo0 = (p0 & _MASK).astype(np.uint32)
        hi1 = (p1 >> _SHIFT).astype(np.uint32)
        lo1 = (p1 & _MASK).astype(np.uint32)
        c0, c1, c2, c3 = hi1 ^ c1 ^ np.uint32(k0), lo1, hi0 ^ c3 ^ np.uint32(k1), lo0
        k0 = (k0 + W0) & 0xFFFFFFFF
        k1 = (k1 + W1) & 0xFFFFFFFF
    return c0, c1, c2, c3


_TWO53 = 9007199254740992.0
_TWO26 = 67108864.0


def uniform_pair(w0, w1, w2, w3):
    """Two 53-bit uniforms: the first in (0, 1], the second in [0, 1)."""
    u1 = ((w0 >> 5).astype(np.float64) * _TWO26 + (w1 >> 6).astype(np.float64) + 1.0) / _TWO53
    u2 = ((w2 >> 5).astype(np.float64) * _TWO26 + (w3 >> 6).astype(np.float64)) / _TWO53
    return u1, u2


def normal_pair(counter, key):
    u1, u2 = uniform_pair(*philox4x32(counter, key))
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    return rad * np.cos(ang), rad * np.sin(ang)


def split_seed(seed: int) -> tuple[np.uint32, np.uint32]:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint32(seed & 0xFFFFFFFF), np.uint32(seed >> 32)


def normals(seed: int, paths: np.ndarray, step_counter: int, d: int) -> np.ndarray:
    """Standard normals of shape ``(len(paths), d)`` for one sub-step: draws
    ``step_counter * d`` to ``step_counter * d + d - 1`` of every path's stream."""
    paths = np.asarray(paths, dtype=np.uint64)
    key = split_seed(seed)
    lo = (paths & _MASK).astype(np.uint32)
    hi = (paths >> _SHIFT).astype(np.uint32)
    out = np.empty((len(paths), d))
    q0 = int(step_counter) * d
    for pair in range(q0 // 2, (q0 + d - 1) // 2 + 1):
        z = normal_pair((np.uint32(pair & 0xFFFFFFFF), np.uint32(pair >> 32), lo, hi), key)
        for half in (0, 1):
            j = 2 * pair + half - q0
            if 0 <= j < d:
                out[:, j] = z[half]
    return out
