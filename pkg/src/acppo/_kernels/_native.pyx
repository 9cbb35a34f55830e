# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementation of the hot kernels.

Mirrors acppo._kernels._numpy exactly (same signatures, same semantics).
Batched matrix products go through BLAS dgemm; the batch-1 forward path and
all elementwise work are hand loops, which is where the speedup over numpy
comes from at these small layer sizes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "native"


cdef void _gemm_nn(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c) noexcept:
    # c (m,n) = a (m,k) @ b (k,n), all row-major
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    cdef double alpha = 1.0, beta = 0.0
    dgemm("N", "N", &n, &m, &k, &alpha, &b[0, 0], &n, &a[0, 0], &k,
          &beta, &c[0, 0], &n)


cdef void _gemm_tn(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c) noexcept:
    # c (m,n) = a.T @ b with a (k,m), b (k,n), all row-major
    cdef int k = a.shape[0], m = a.shape[1], n = b.shape[1]
    cdef double alpha = 1.0, beta = 0.0
    dgemm("N", "T", &n, &m, &k, &alpha, &b[0, 0], &n, &a[0, 0], &m,
          &beta, &c[0, 0], &n)


cdef void _gemm_nt(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c) noexcept:
    # c (m,n) = a @ b.T with a (m,k), b (n,k), all row-major
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[0]
    cdef double alpha = 1.0, beta = 0.0
    dgemm("T", "N", &n, &m, &k, &alpha, &b[0, 0], &k, &a[0, 0], &k,
          &beta, &c[0, 0], &n)


def discount_scan(x, double decay):
    """Backward recursion y[t] = x[t] + decay * y[t+1], y[-1] = x[-1]."""
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef double acc = 0.0
    cdef Py_ssize_t t
    for t in range(xv.shape[0] - 1, -1, -1):
        acc = xv[t] + decay * acc
        ov[t] = acc
    return out


def mlp_forward(weights, biases, x):
    """Forward pass returning all activations [x, h1, ..., output]."""
    cdef cnp.ndarray xa = np.ascontiguousarray(x, dtype=np.float64)
    acts = [xa]
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t i, r, j, k
    cdef double[:, ::1] w, h_in, h_out
    cdef double[::1] b
    cdef cnp.ndarray out
    cdef double s
    cdef bint relu
    for i in range(n_layers):
        w = weights[i]
        b = biases[i]
        h_in = acts[len(acts) - 1]
        out = np.empty((h_in.shape[0], w.shape[1]), dtype=np.float64)
        h_out = out
        relu = i != n_layers - 1
        if h_in.shape[0] == 1:
            for j in range(w.shape[1]):
                h_out[0, j] = b[j]
            for k in range(w.shape[0]):
                s = h_in[0, k]
                if s != 0.0:
                    for j in range(w.shape[1]):
                        h_out[0, j] += s * w[k, j]
            if relu:
                for j in range(w.shape[1]):
                    if h_out[0, j] < 0.0:
                        h_out[0, j] = 0.0
        else:
            _gemm_nn(h_in, w, h_out)
            for r in range(h_out.shape[0]):
                for j in range(h_out.shape[1]):
                    s = h_out[r, j] + b[j]
                    if relu and s < 0.0:
                        s = 0.0
                    h_out[r, j] = s
        acts.append(out)
    return acts


def mlp_backward(weights, acts, d_out):
    """Reverse-mode gradients of mlp_forward: (dWs, dbs, dX)."""
    cdef Py_ssize_t n_layers = len(weights)
    d_ws = [None] * n_layers
    d_bs = [None] * n_layers
    cdef cnp.ndarray delta = np.ascontiguousarray(d_out, dtype=np.float64)
    cdef cnp.ndarray dw, db, dprev
    cdef double[:, ::1] wv, av, dv, dwv, dpv
    cdef double[::1] dbv
    cdef Py_ssize_t i, r, j
    cdef double s
    for i in range(n_layers - 1, -1, -1):
        wv = weights[i]
        av = acts[i]
        dv = delta
        dw = np.empty((wv.shape[0], wv.shape[1]), dtype=np.float64)
        dwv = dw
        _gemm_tn(av, dv, dwv)
        db = np.empty(wv.shape[1], dtype=np.float64)
        dbv = db
        for j in range(wv.shape[1]):
            s = 0.0
            for r in range(dv.shape[0]):
                s += dv[r, j]
            dbv[j] = s
        d_ws[i] = dw
        d_bs[i] = db
        dprev = np.empty((dv.shape[0], wv.shape[0]), dtype=np.float64)
        dpv = dprev
        _gemm_nt(dv, wv, dpv)
        if i > 0:
            for r in range(dpv.shape[0]):
                for j in range(dpv.shape[1]):
                    if av[r, j] <= 0.0:
                        dpv[r, j] = 0.0
        delta = dprev
    return d_ws, d_bs, delta


def adam_step(param, grad, m, v, long t, double lr, double beta1,
              double beta2, double eps):
    """One Adam update with bias correction, in place on flat arrays."""
    cdef double[::1] p = param, g = grad, mv = m, vv = v
    cdef double c1 = 1.0 - beta1 ** t
    cdef double c2 = 1.0 - beta2 ** t
    cdef Py_ssize_t i
    cdef double gi
    for i in range(p.shape[0]):
        gi = g[i]
        mv[i] = beta1 * mv[i] + (1.0 - beta1) * gi
        vv[i] = beta2 * vv[i] + (1.0 - beta2) * gi * gi
        p[i] -= lr * (mv[i] / c1) / (sqrt(vv[i] / c2) + eps)
