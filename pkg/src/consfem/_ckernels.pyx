# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element-matrix kernels; same signatures as ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _monomials(const double[:] b, double* m) noexcept nogil:
    m[0] = b[0] * b[0]
    m[1] = b[1] * b[1]
    m[2] = b[2] * b[2]
    m[3] = b[1] * b[2]
    m[4] = b[2] * b[0]
    m[5] = b[0] * b[1]


cdef inline void _monomial_grads(const double[:] b, const double[:, :] g, double* gm) noexcept nogil:
    # gm[m*2 + d]
    cdef int d
    for d in range(2):
        gm[0 + d] = 2.0 * b[0] * g[0, d]
        gm[2 + d] = 2.0 * b[1] * g[1, d]
        gm[4 + d] = 2.0 * b[2] * g[2, d]
        gm[6 + d] = b[1] * g[2, d] + b[2] * g[1, d]
        gm[8 + d] = b[2] * g[0, d] + b[0] * g[2, d]
        gm[10 + d] = b[0] * g[1, d] + b[1] * g[0, d]


cdef inline void _eval(const double[:, :, :] Cc, int nb, const double* m, const double* gm,
                       double* vals, double* grads) noexcept nogil:
    # vals[b*2 + i], grads[b*4 + i*2 + j]
    cdef int b, i, j, k
    cdef double v, c
    for b in range(nb):
        for i in range(2):
            v = 0.0
            for k in range(6):
                v += Cc[b, k, i] * m[k]
            vals[b * 2 + i] = v
            for j in range(2):
                v = 0.0
                for k in range(6):
                    v += Cc[b, k, i] * gm[k * 2 + j]
                grads[b * 4 + i * 2 + j] = v


def gradgrad_local(const double[:, :, :, :] C, const double[:, :, :] gl,
                   const double[:] area, const double[:, :] bary, const double[:] w):
    cdef Py_ssize_t nc = C.shape[0], nq = bary.shape[0], c, q
    cdef int nb = C.shape[1], a, b, r
    cdef double m[6]
    cdef double gm[12]
    cdef double vals[64]
    cdef double grads[128]
    cdef double wt, s
    out = np.zeros((nc, nb, nb))
    cdef double[:, :, :] K = out
    with nogil:
        for c in range(nc):
            for q in range(nq):
                _monomials(bary[q], m)
                _monomial_grads(bary[q], gl[c], gm)
                _eval(C[c], nb, m, gm, vals, grads)
                wt = 2.0 * area[c] * w[q]
                for a in range(nb):
                    for b in range(a, nb):
                        s = 0.0
                        for r in range(4):
                            s += grads[a * 4 + r] * grads[b * 4 + r]
                        K[c, a, b] += wt * s
            for a in range(nb):
                for b in range(a):
                    K[c, a, b] = K[c, b, a]
    return out


def mass_local(const double[:, :, :, :] C, const double[:, :, :] gl,
               const double[:] area, const double[:, :] bary, const double[:] w):
    cdef Py_ssize_t nc = C.shape[0], nq = bary.shape[0], c, q
    cdef int nb = C.shape[1], a, b
    cdef double m[6]
    cdef double gm[12]
    cdef double vals[64]
    cdef double grads[128]
    cdef double wt
    out = np.zeros((nc, nb, nb))
    cdef double[:, :, :] M = out
    with nogil:
        for c in range(nc):
            for q in range(nq):
                _monomials(bary[q], m)
                _monomial_grads(bary[q], gl[c], gm)
                _eval(C[c], nb, m, gm, vals, grads)
                wt = 2.0 * area[c] * w[q]
                for a in range(nb):
                    for b in range(a, nb):
                        M[c, a, b] += wt * (vals[a * 2] * vals[b * 2] + vals[a * 2 + 1] * vals[b * 2 + 1])
            for a in range(nb):
                for b in range(a):
                    M[c, a, b] = M[c, b, a]
    return out


def convection_local(const double[:, :, :, :] C, const double[:, :, :] gl,
                     const double[:] area, const double[:, :] bary, const double[:] w,
                     const double[:, :] wloc):
    cdef Py_ssize_t nc = C.shape[0], nq = bary.shape[0], c, q
    cdef int nb = C.shape[1], a, b, i
    cdef double m[6]
    cdef double gm[12]
    cdef double vals[64]
    cdef double grads[128]
    cdef double conv[64]
    cdef double wt, w0, w1
    out = np.zeros((nc, nb, nb))
    cdef double[:, :, :] N = out
    with nogil:
        for c in range(nc):
            for q in range(nq):
                _monomials(bary[q], m)
                _monomial_grads(bary[q], gl[c], gm)
                _eval(C[c], nb, m, gm, vals, grads)
                w0 = 0.0
                w1 = 0.0
                for b in range(nb):
                    w0 += wloc[c, b] * vals[b * 2]
                    w1 += wloc[c, b] * vals[b * 2 + 1]
                # conv[b*2+i] = (w . grad) phi_b, component i
                for b in range(nb):
                    for i in range(2):
                        conv[b * 2 + i] = w0 * grads[b * 4 + i * 2] + w1 * grads[b * 4 + i * 2 + 1]
                wt = 2.0 * area[c] * w[q]
                for a in range(nb):
                    for b in range(nb):
                        N[c, a, b] += wt * (conv[b * 2] * vals[a * 2] + conv[b * 2 + 1] * vals[a * 2 + 1])
    return out


def convection_derivative_local(const double[:, :, :, :] C, const double[:, :, :] gl,
                                const double[:] area, const double[:, :] bary,
                                const double[:] w, const double[:, :] uloc):
    cdef Py_ssize_t nc = C.shape[0], nq = bary.shape[0], c, q
    cdef int nb = C.shape[1], a, b, i, j
    cdef double m[6]
    cdef double gm[12]
    cdef double vals[64]
    cdef double grads[128]
    cdef double gu[4]
    cdef double tmp[64]
    cdef double wt
    out = np.zeros((nc, nb, nb))
    cdef double[:, :, :] J = out
    with nogil:
        for c in range(nc):
            for q in range(nq):
                _monomials(bary[q], m)
                _monomial_grads(bary[q], gl[c], gm)
                _eval(C[c], nb, m, gm, vals, grads)
                for i in range(4):
                    gu[i] = 0.0
                for b in range(nb):
                    for i in range(4):
                        gu[i] += uloc[c, b] * grads[b * 4 + i]
                # tmp[b*2+i] = (phi_b . grad) u, component i
                for b in range(nb):
                    for i in range(2):
                        tmp[b * 2 + i] = gu[i * 2] * vals[b * 2] + gu[i * 2 + 1] * vals[b * 2 + 1]
                wt = 2.0 * area[c] * w[q]
                for a in range(nb):
                    for b in range(nb):
                        J[c, a, b] += wt * (tmp[b * 2] * vals[a * 2] + tmp[b * 2 + 1] * vals[a * 2 + 1])
    return out
