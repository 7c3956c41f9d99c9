# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Wilson hopping kernel; same contract as ``_kernels_py.wilson_apply``."""

import numpy as np

ctypedef double complex cplx


def wilson_apply(const cplx[:, :, :, ::1] links, const long[:, ::1] fwd, const long[:, ::1] bwd,
                 const cplx[:, :, ::1] gammas, const cplx[:, ::1] chirality,
                 double a, double m, const cplx[:, :, ::1] psi):
    cdef Py_ssize_t V = fwd.shape[0]
    cdef Py_ssize_t n = fwd.shape[1]
    cdef Py_ssize_t ns = gammas.shape[1]
    cdef Py_ssize_t nc = psi.shape[2]
    cdef Py_ssize_t v, i, s, t, c, d, zf, zb
    cdef double diag = m + n / a
    cdef double hop_scale = 1.0 / (2.0 * a)
    out_arr = np.empty((V, ns, nc), dtype=np.complex128)
    res_arr = np.empty((ns, nc), dtype=np.complex128)
    f_arr = np.empty((ns, nc), dtype=np.complex128)
    b_arr = np.empty((ns, nc), dtype=np.complex128)
    cdef cplx[:, :, ::1] out = out_arr
    cdef cplx[:, ::1] res = res_arr
    cdef cplx[:, ::1] f = f_arr
    cdef cplx[:, ::1] b = b_arr
    cdef cplx acc, g
    with nogil:
        for v in range(V):
            for s in range(ns):
                for c in range(nc):
                    res[s, c] = diag * psi[v, s, c]
            for i in range(n):
                zf = fwd[v, i]
                zb = bwd[v, i]
                # f = U_i(v) psi(v+i), b = U_i(v-i)^dagger psi(v-i)
                for s in range(ns):
                    for c in range(nc):
                        acc = 0
                        for d in range(nc):
                            acc = acc + links[v, i, c, d] * psi[zf, s, d]
                        f[s, c] = acc
                        acc = 0
                        for d in range(nc):
                            g = links[zb, i, d, c]
                            acc = acc + (g.real - 1j * g.imag) * psi[zb, s, d]
                        b[s, c] = acc
                # res -= [(1 - c_i) f + (1 + c_i) b] / (2a)
                for s in range(ns):
                    for c in range(nc):
                        acc = f[s, c] + b[s, c]
                        for t in range(ns):
                            acc = acc - gammas[i, s, t] * (f[t, c] - b[t, c])
                        res[s, c] = res[s, c] - hop_scale * acc
            for s in range(ns):
                for c in range(nc):
                    acc = 0
                    for t in range(ns):
                        acc = acc + chirality[s, t] * res[t, c]
                    out[v, s, c] = acc
    return out_arr
