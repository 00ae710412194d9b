# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled boundary-element kernels; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, M_PI

cnp.import_array()


cdef inline double _seg_dist(double px, double py, double ax, double ay,
                             double bx, double by) noexcept nogil:
    cdef double dx = bx - ax, dy = by - ay
    cdef double t = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    dx = px - (ax + t * dx)
    dy = py - (ay + t * dy)
    return sqrt(dx * dx + dy * dy)


cdef inline void _eval(double r1, double r2, double n1, double n2, int nkind,
                       double *us, double *un) noexcept nogil:
    cdef double c = 1.0 / (2.0 * M_PI)
    cdef double rr = r1 * r1 + r2 * r2
    cdef double q = r1 * n1 + r2 * n2
    cdef double i2 = 1.0 / rr
    cdef double i4, i6
    us[0] = 0.5 * log(rr) * c
    un[0] = q * i2 * c
    if nkind > 1:
        i4 = i2 * i2
        i6 = i4 * i2
        us[1] = -r1 * i2 * c
        us[2] = -r2 * i2 * c
        us[3] = (r2 * r2 - r1 * r1) * i4 * c
        us[4] = -2.0 * r1 * r2 * i4 * c
        us[5] = (r1 * r1 - r2 * r2) * i4 * c
        un[1] = (-n1 * i2 + 2.0 * q * r1 * i4) * c
        un[2] = (-n2 * i2 + 2.0 * q * r2 * i4) * c
        un[3] = (-4.0 * n1 * r1 * i4 - 2.0 * q * i4 + 8.0 * q * r1 * r1 * i6) * c
        un[4] = (-2.0 * (n1 * r2 + n2 * r1) * i4 + 8.0 * q * r1 * r2 * i6) * c
        un[5] = (-4.0 * n2 * r2 * i4 - 2.0 * q * i4 + 8.0 * q * r2 * r2 * i6) * c


cdef Py_ssize_t CHUNK = 128


def integrate_elements(points, starts, ends, normals, lengths, skip, int nkind,
                       double near_factor, rules, uhat, qhat):
    """Integrate kernels over straight elements for every collocation point.

    See ``fracbem._kernels_py.integrate_elements`` for the full contract.
    Far pairs use the coarse rule and their domain term is accumulated with
    one matrix product per chunk of points; near pairs use the fine rule and
    are accumulated directly.
    """
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] sa = np.ascontiguousarray(starts, dtype=np.float64)
    cdef double[:, ::1] ea = np.ascontiguousarray(ends, dtype=np.float64)
    cdef double[:, ::1] nm = np.ascontiguousarray(normals, dtype=np.float64)
    cdef double[::1] ln = np.ascontiguousarray(lengths, dtype=np.float64)
    cdef long[::1] sk = np.ascontiguousarray(skip, dtype=np.int64)
    cdef double[::1] xc = np.ascontiguousarray(rules[0][0], dtype=np.float64)
    cdef double[::1] wc = np.ascontiguousarray(rules[0][1], dtype=np.float64)
    cdef double[::1] xf = np.ascontiguousarray(rules[1][0], dtype=np.float64)
    cdef double[::1] wf = np.ascontiguousarray(rules[1][1], dtype=np.float64)
    uc_arr = np.ascontiguousarray(uhat[0], dtype=np.float64)
    qc_arr = np.ascontiguousarray(qhat[0], dtype=np.float64)
    cdef double[:, :, ::1] uf = np.ascontiguousarray(uhat[1], dtype=np.float64)
    cdef double[:, :, ::1] qf = np.ascontiguousarray(qhat[1], dtype=np.float64)
    cdef Py_ssize_t P = pts.shape[0], N = sa.shape[0], M = uc_arr.shape[2]
    cdef Py_ssize_t Qc = xc.shape[0], Qf = xf.shape[0]
    Gout = np.zeros((P, N, nkind))
    Hout = np.zeros((P, N, nkind))
    Aout = np.zeros((P, M, nkind))
    cdef double[:, :, ::1] G = Gout
    cdef double[:, :, ::1] H = Hout
    cdef double[:, :, ::1] A = Aout
    uc2 = uc_arr.reshape(N * Qc, M)
    qc2 = qc_arr.reshape(N * Qc, M)
    WUarr = np.zeros((nkind, CHUNK, N * Qc))
    WNarr = np.zeros((nkind, CHUNK, N * Qc))
    cdef double[:, :, ::1] WU = WUarr
    cdef double[:, :, ::1] WN = WNarr
    cdef double us[6]
    cdef double un[6]
    cdef Py_ssize_t c0, pc, i, ii, k, g, j, kk
    cdef double px, py, mx, my, hx, hy, yx, yy, w, wu, wn, half
    cdef bint near

    for c0 in range(0, P, CHUNK):
        pc = min(CHUNK, P - c0)
        WUarr[...] = 0.0
        WNarr[...] = 0.0
        with nogil:
            for ii in range(pc):
                i = c0 + ii
                px = pts[i, 0]
                py = pts[i, 1]
                for k in range(N):
                    if k == sk[i]:
                        continue
                    near = _seg_dist(px, py, sa[k, 0], sa[k, 1], ea[k, 0], ea[k, 1]) < near_factor * ln[k]
                    mx = 0.5 * (sa[k, 0] + ea[k, 0])
                    my = 0.5 * (sa[k, 1] + ea[k, 1])
                    hx = 0.5 * (ea[k, 0] - sa[k, 0])
                    hy = 0.5 * (ea[k, 1] - sa[k, 1])
                    half = 0.5 * ln[k]
                    if near:
                        for g in range(Qf):
                            yx = mx + xf[g] * hx
                            yy = my + xf[g] * hy
                            _eval(yx - px, yy - py, nm[k, 0], nm[k, 1], nkind, us, un)
                            w = half * wf[g]
                            for kk in range(nkind):
                                wu = w * us[kk]
                                wn = w * un[kk]
                                G[i, k, kk] += wu
                                H[i, k, kk] += wn
                                for j in range(M):
                                    A[i, j, kk] += wu * qf[k, g, j] - wn * uf[k, g, j]
                    else:
                        for g in range(Qc):
                            yx = mx + xc[g] * hx
                            yy = my + xc[g] * hy
                            _eval(yx - px, yy - py, nm[k, 0], nm[k, 1], nkind, us, un)
                            w = half * wc[g]
                            for kk in range(nkind):
                                wu = w * us[kk]
                                wn = w * un[kk]
                                G[i, k, kk] += wu
                                H[i, k, kk] += wn
                                WU[kk, ii, k * Qc + g] = wu
                                WN[kk, ii, k * Qc + g] = wn
        if M:
            for kk in range(nkind):
                Aout[c0:c0 + pc, :, kk] += WUarr[kk, :pc] @ qc2 - WNarr[kk, :pc] @ uc2
    return Gout, Hout, Aout
