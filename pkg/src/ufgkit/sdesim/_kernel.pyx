# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled path simulator: Philox noise, midpoint Stratonovich steps, OpenMP over paths."""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt, log, sin, cos, fabs, isfinite, M_PI
from libc.stdint cimport uint32_t, uint64_t, int64_t, int32_t
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double BLOWUP = 1e12


cdef inline void philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t c0 = c[0], c1 = c[1], c2 = c[2], c3 = c[3]
    cdef int r
    for r in range(10):
        p0 = <uint64_t>0xD2511F53UL * c0
        p1 = <uint64_t>0xCD9E8D57UL * c2
        c0 = <uint32_t>(p1 >> 32) ^ c1 ^ k0
        c1 = <uint32_t>p1
        c2 = <uint32_t>(p0 >> 32) ^ c3 ^ k1
        c3 = <uint32_t>p0
        k0 = k0 + <uint32_t>0x9E3779B9UL
        k1 = k1 + <uint32_t>0xBB67AE85UL
    c[0] = c0
    c[1] = c1
    c[2] = c2
    c[3] = c3


cdef inline void normal_pair(uint64_t pair, uint64_t path,
                             uint32_t k0, uint32_t k1, double* z) noexcept nogil:
    cdef uint32_t c[4]
    c[0] = <uint32_t>pair
    c[1] = <uint32_t>(pair >> 32)
    c[2] = <uint32_t>path
    c[3] = <uint32_t>(path >> 32)
    philox(c, k0, k1)
    cdef double u1 = ((c[0] >> 5) * 67108864.0 + (c[1] >> 6) + 1.0) / 9007199254740992.0
    cdef double u2 = ((c[2] >> 5) * 67108864.0 + (c[3] >> 6)) / 9007199254740992.0
    cdef double rad = sqrt(-2.0 * log(u1))
    cdef double ang = 2.0 * M_PI * u2
    z[0] = rad * cos(ang)
    z[1] = rad * sin(ang)


cdef inline double ipow(double b, int p) noexcept nogil:
    cdef double out = 1.0
    cdef int i
    for i in range(p):
        out = out * b
    return out


cdef inline void eval_fields(const double* x, int n, int nf, int nt, const double* coeff,
                             const int32_t* fstart, const int32_t* fcoord, const int32_t* fkind,
                             const int32_t* fpow, const int32_t* target, bint trig,
                             double* sx, double* cx, double* out) noexcept nogil:
    cdef int k, q, t
    cdef double v, base
    if trig:
        for k in range(n):
            sx[k] = sin(x[k])
            cx[k] = cos(x[k])
    for k in range(nf * n):
        out[k] = 0.0
    for t in range(nt):
        v = coeff[t]
        for q in range(fstart[t], fstart[t + 1]):
            k = fcoord[q]
            if fkind[q] == 0:
                base = x[k]
            elif fkind[q] == 1:
                base = sx[k]
            else:
                base = cx[k]
            v = v * ipow(base, fpow[q])
        out[target[t]] = out[target[t]] + v


def simulate(table, x0s, snap_steps, double dt, seed, long long path_start,
             long long n_paths, int substeps=1, int threads=1):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X0 = np.ascontiguousarray(x0s, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] snaps = np.ascontiguousarray(snap_steps, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] coeff = np.ascontiguousarray(table.coeff, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] fs = np.ascontiguousarray(table.fstart, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] fc = np.ascontiguousarray(table.fcoord, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] fk = np.ascontiguousarray(table.fkind, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] fp = np.ascontiguousarray(table.fpow, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] tg = np.ascontiguousarray(table.target, dtype=np.int32)
    cdef int nt = coeff.shape[0]
    cdef int nf = table.n_fields
    cdef int n = X0.shape[1]
    cdef int s_count = X0.shape[0]
    cdef int d = nf - 1
    cdef int n_snap = snaps.shape[0]
    cdef long long n_steps = snaps.max() if n_snap else 0
    cdef bint trig = table.uses_trig
    py_seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    cdef uint32_t k0 = <uint32_t>(py_seed & 0xFFFFFFFF)
    cdef uint32_t k1 = <uint32_t>(py_seed >> 32)
    cdef double sq = sqrt(2.0)
    cdef double sub_scale = sqrt(dt / substeps)
    out_arr = np.empty((n_paths, n_snap, s_count, n), dtype=np.float64)
    blown_arr = np.zeros(n_paths, dtype=np.uint8)
    cdef double[:, :, :, ::1] out = out_arr
    cdef cnp.uint8_t[::1] blown = blown_arr

    cdef const double* c_coeff = <const double*>coeff.data
    cdef const int32_t* c_fs = <const int32_t*>fs.data
    cdef const int32_t* c_fc = <const int32_t*>fc.data
    cdef const int32_t* c_fk = <const int32_t*>fk.data
    cdef const int32_t* c_fp = <const int32_t*>fp.data
    cdef const int32_t* c_tg = <const int32_t*>tg.data
    cdef const double* c_x0 = <const double*>X0.data

    cdef long long p, step
    cdef int s, i, j, sub, b, snap_idx, nbuf
    cdef uint64_t path, q
    cdef double* buf
    cdef double* x
    cdef double* mid
    cdef double* vals
    cdef double* dw
    cdef double* sx
    cdef double* cx
    cdef double* z
    cdef double* nx
    cdef double acc
    cdef bint bad

    nbuf = 2 * s_count * n + n + nf * n + (d + 2) + 2 * n + 2
    for p in prange(n_paths, nogil=True, schedule="static", num_threads=threads):
        buf = <double*>malloc(nbuf * sizeof(double))
        x = buf
        mid = x + s_count * n
        vals = mid + n
        dw = vals + nf * n
        sx = dw + d + 2
        cx = sx + n
        nx = cx + n
        z = nx + s_count * n
        path = <uint64_t>(path_start + p)
        for i in range(s_count * n):
            x[i] = c_x0[i]
        snap_idx = 0
        while snap_idx < n_snap and snaps[snap_idx] == 0:
            for s in range(s_count):
                for i in range(n):
                    out[p, snap_idx, s, i] = x[s * n + i]
            snap_idx = snap_idx + 1
        for step in range(n_steps):
            if blown[p] == 0:
                for j in range(d):
                    dw[j] = 0.0
                for sub in range(substeps):
                    for j in range(d):
                        q = <uint64_t>((step * substeps + sub) * d + j)
                        # odd draws reuse the second half of the previous pair
                        if q % 2 == 0:
                            normal_pair(q // 2, path, k0, k1, z)
                        dw[j] = dw[j] + z[q % 2]
                for j in range(d):
                    dw[j] = dw[j] * sub_scale
                bad = False
                for s in range(s_count):
                    # predictor
                    eval_fields(&x[s * n], n, nf, nt, c_coeff, c_fs, c_fc, c_fk, c_fp, c_tg, trig, sx, cx, vals)
                    for i in range(n):
                        acc = vals[i] * dt
                        for j in range(d):
                            acc = acc + sq * vals[(j + 1) * n + i] * dw[j]
                        mid[i] = 0.5 * (x[s * n + i] + (x[s * n + i] + acc))
                    # corrector at the midpoint
                    eval_fields(mid, n, nf, nt, c_coeff, c_fs, c_fc, c_fk, c_fp, c_tg, trig, sx, cx, vals)
                    for i in range(n):
                        acc = vals[i] * dt
                        for j in range(d):
                            acc = acc + sq * vals[(j + 1) * n + i] * dw[j]
                        nx[s * n + i] = x[s * n + i] + acc
                        if not isfinite(nx[s * n + i]) or fabs(nx[s * n + i]) > BLOWUP:
                            bad = True
                if not bad:
                    for i in range(s_count * n):
                        x[i] = nx[i]
                if bad:
                    blown[p] = 1
            while snap_idx < n_snap and snaps[snap_idx] == step + 1:
                for s in range(s_count):
                    for i in range(n):
                        out[p, snap_idx, s, i] = x[s * n + i]
                snap_idx = snap_idx + 1
        free(buf)
    return out_arr, blown_arr
