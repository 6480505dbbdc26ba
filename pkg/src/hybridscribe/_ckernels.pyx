# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the decoding hot loops (see ``_pykernels``)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, log1p, exp, fabs

cnp.import_array()


cdef inline double _sig(double x) nogil:
    return 0.5 * (1.0 + tanh(0.5 * x))


cdef inline double _logsig(double x) nogil:
    # log(sigmoid(x)) = min(x, 0) - log1p(exp(-|x|))
    if x >= 0:
        return -log1p(exp(-x))
    return x - log1p(exp(x))


def affine_rows(X, W, b):
    cdef double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef double[::1] bb = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t B = x.shape[0], M = w.shape[0], K = w.shape[1]
    out_arr = np.empty((B, M))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, m, k
    cdef double acc
    with nogil:
        for r in range(B):
            for m in range(M):
                acc = 0.0
                for k in range(K):
                    acc += x[r, k] * w[m, k]
                out[r, m] = acc + bb[m]
    return out_arr


def sigmoid_affine_rows(X, W, b):
    out_arr = affine_rows(X, W, b)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, m
    with nogil:
        for r in range(out.shape[0]):
            for m in range(out.shape[1]):
                out[r, m] = _sig(out[r, m])
    return out_arr


def bernoulli_logprob_rows(logp1, logp0, Z):
    cdef double[::1] l1 = np.ascontiguousarray(logp1, dtype=np.float64)
    cdef double[::1] l0 = np.ascontiguousarray(logp0, dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] z = np.ascontiguousarray(np.asarray(Z) > 0, dtype=np.uint8)
    cdef Py_ssize_t B = z.shape[0], N = z.shape[1], r, j
    out_arr = np.empty(B)
    cdef double[::1] out = out_arr
    cdef double acc
    with nogil:
        for r in range(B):
            acc = 0.0
            for j in range(N):
                if z[r, j]:
                    acc += l1[j]
                else:
                    acc += l0[j]
            out[r] = acc
    return out_arr


def nade_logprob_rows(W, V, bv, c, Z):
    cdef double[:, ::1] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef double[:, ::1] v = np.ascontiguousarray(V, dtype=np.float64)
    cdef double[:, ::1] bvis = np.ascontiguousarray(bv, dtype=np.float64)
    cdef double[:, ::1] chid = np.ascontiguousarray(c, dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] z = np.ascontiguousarray(np.asarray(Z) > 0, dtype=np.uint8)
    cdef Py_ssize_t B = z.shape[0], D = z.shape[1], H = w.shape[1]
    cdef Py_ssize_t r, i, k
    out_arr = np.empty(B)
    cdef double[::1] out = out_arr
    acc_arr = np.empty(H)
    cdef double[::1] a = acc_arr
    hid_arr = np.empty(H)
    cdef double[::1] h = hid_arr
    cdef double logit, lp
    with nogil:
        for r in range(B):
            for k in range(H):
                a[k] = chid[r, k]
                h[k] = _sig(a[k])
            lp = 0.0
            for i in range(D):
                logit = 0.0
                for k in range(H):
                    logit += h[k] * v[i, k]
                logit = bvis[r, i] + logit
                if z[r, i]:
                    lp += _logsig(logit)
                    # hidden activations only move after an active unit
                    for k in range(H):
                        a[k] += w[i, k]
                        h[k] = _sig(a[k])
                else:
                    lp += _logsig(-logit)
            out[r] = lp
    return out_arr


def viterbi_binary(emit, log_trans, log_init):
    cdef double[:, :, ::1] e = np.ascontiguousarray(emit, dtype=np.float64)
    cdef double[:, :, ::1] A = np.ascontiguousarray(log_trans, dtype=np.float64)
    cdef double[:, ::1] pi = np.ascontiguousarray(log_init, dtype=np.float64)
    cdef Py_ssize_t T = e.shape[0], N = e.shape[1], t, j, s
    path_arr = np.zeros((T, N), dtype=np.int8)
    if T == 0:
        return path_arr
    cdef cnp.int8_t[:, ::1] path = path_arr
    back_arr = np.zeros((T, 2), dtype=np.int8)
    cdef cnp.int8_t[:, ::1] back = back_arr
    cdef double d0, d1, n0, n1, f_off, f_on
    cdef int state
    with nogil:
        for j in range(N):
            d0 = pi[j, 0] + e[0, j, 0]
            d1 = pi[j, 1] + e[0, j, 1]
            for t in range(1, T):
                f_off = d0 + A[j, 0, 0]
                f_on = d1 + A[j, 1, 0]
                if f_on >= f_off:
                    back[t, 0] = 1
                    n0 = f_on + e[t, j, 0]
                else:
                    back[t, 0] = 0
                    n0 = f_off + e[t, j, 0]
                f_off = d0 + A[j, 0, 1]
                f_on = d1 + A[j, 1, 1]
                if f_on >= f_off:
                    back[t, 1] = 1
                    n1 = f_on + e[t, j, 1]
                else:
                    back[t, 1] = 0
                    n1 = f_off + e[t, j, 1]
                d0 = n0
                d1 = n1
            state = 1 if d1 >= d0 else 0
            path[T - 1, j] = state
            for t in range(T - 1, 0, -1):
                state = back[t, state]
                path[t - 1, j] = state
    return path_arr
