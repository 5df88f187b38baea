# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled local assembly kernels. Semantics match alefem._kernels.fallback."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def stiffness_locals(const double[::1] dets, const double[:, :, :, ::1] gradhat,
                     const double[:, :, ::1] cof, const double[::1] jac,
                     const double[::1] wq, double scale):
    cdef Py_ssize_t n_e = gradhat.shape[0]
    cdef Py_ssize_t nq = gradhat.shape[1]
    cdef Py_ssize_t nloc = gradhat.shape[2]
    out_arr = np.zeros((n_e, nloc, nloc))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, q, i, j
    cdef double b0, b1, c0, c1, w, pref
    # (C^T g)_k = C[0,k] g0 + C[1,k] g1
    for e in range(n_e):
        pref = scale * dets[e] / jac[e]
        for q in range(nq):
            w = wq[q]
            for i in range(nloc):
                b0 = cof[e, 0, 0] * gradhat[e, q, i, 0] + cof[e, 1, 0] * gradhat[e, q, i, 1]
                b1 = cof[e, 0, 1] * gradhat[e, q, i, 0] + cof[e, 1, 1] * gradhat[e, q, i, 1]
                for j in range(nloc):
                    c0 = cof[e, 0, 0] * gradhat[e, q, j, 0] + cof[e, 1, 0] * gradhat[e, q, j, 1]
                    c1 = cof[e, 0, 1] * gradhat[e, q, j, 0] + cof[e, 1, 1] * gradhat[e, q, j, 1]
                    out[e, i, j] += pref * w * (b0 * c0 + b1 * c1)
    return out_arr


def motion_locals(const double[::1] dets, const double[:, ::1] phi,
                  const double[:, :, :, ::1] gradhat, const double[:, :, ::1] flux,
                  const double[:, ::1] lam, const double[::1] divflux, const double[::1] wq):
    cdef Py_ssize_t n_e = gradhat.shape[0]
    cdef Py_ssize_t nq = gradhat.shape[1]
    cdef Py_ssize_t nloc = gradhat.shape[2]
    out_arr = np.zeros((n_e, nloc, nloc))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, q, i, j, k
    cdef double f0, f1, w, dv, det
    for e in range(n_e):
        det = dets[e]
        dv = divflux[e]
        for q in range(nq):
            w = wq[q]
            f0 = 0.0
            f1 = 0.0
            for k in range(3):
                f0 += lam[q, k] * flux[e, k, 0]
                f1 += lam[q, k] * flux[e, k, 1]
            for i in range(nloc):
                for j in range(nloc):
                    out[e, i, j] += det * w * phi[q, i] * (
                        f0 * gradhat[e, q, j, 0] + f1 * gradhat[e, q, j, 1]
                        + dv * phi[q, j])
    return out_arr


def load_locals(const double[::1] dets, const double[::1] jac, const double[:, ::1] phi,
                const double[:, ::1] fq, const double[::1] wq, double scale):
    cdef Py_ssize_t n_e = fq.shape[0]
    cdef Py_ssize_t nq = phi.shape[0]
    cdef Py_ssize_t nloc = phi.shape[1]
    out_arr = np.zeros((n_e, nloc))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e, q, i
    cdef double pref, wf
    for e in range(n_e):
        pref = scale * dets[e] * jac[e]
        for q in range(nq):
            wf = wq[q] * fq[e, q]
            for i in range(nloc):
                out[e, i] += pref * wf * phi[q, i]
    return out_arr
