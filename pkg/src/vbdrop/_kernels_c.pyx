# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of ``_kernels_np``: BLAS matmuls plus fused elementwise loops.

Row-major products are computed with Fortran dgemm by swapping the operand
order (C = A.B  <=>  C^T = B^T.A^T on the column-major view of the same
memory).  Elementwise passes run under nogil.
"""

import numpy as np

from libc.math cimport exp, log, log1p, sqrt
from scipy.linalg.cython_blas cimport dgemm


cdef double ONE = 1.0
cdef double ZERO = 0.0


cdef void _gemm_nn(double* a, double* b, double* c, int m, int k, int n) noexcept nogil:
    # c[m,n] = a[m,k] . b[k,n], all row-major
    cdef char tn = b'N'
    dgemm(&tn, &tn, &n, &m, &k, &ONE, b, &n, a, &k, &ZERO, c, &n)


cdef void _gemm_tn(double* a, double* b, double* c, int m, int k, int n) noexcept nogil:
    # c[k,n] = a[m,k]^T . b[m,n], all row-major
    cdef char tn = b'N'
    cdef char tt = b'T'
    dgemm(&tn, &tt, &n, &k, &m, &ONE, b, &n, a, &k, &ZERO, c, &n)


cdef void _gemm_nt(double* a, double* b, double* c, int m, int n, int k) noexcept nogil:
    # c[m,k] = a[m,n] . b[k,n]^T, all row-major
    cdef char tn = b'N'
    cdef char tt = b'T'
    dgemm(&tt, &tn, &k, &m, &n, &ONE, b, &n, a, &n, &ZERO, c, &k)


def matmul(double[:, ::1] a, double[:, ::1] b):
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    if k == 0 or m == 0 or n == 0:
        return np.zeros((m, n))
    out = np.empty((m, n))
    cdef double[:, ::1] c = out
    with nogil:
        _gemm_nn(&a[0, 0], &b[0, 0], &c[0, 0], m, k, n)
    return out


def matmul_tn(double[:, ::1] a, double[:, ::1] b):
    """a.T @ b"""
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    if k == 0 or m == 0 or n == 0:
        return np.zeros((k, n))
    out = np.empty((k, n))
    cdef double[:, ::1] c = out
    with nogil:
        _gemm_tn(&a[0, 0], &b[0, 0], &c[0, 0], m, k, n)
    return out


def matmul_nt(double[:, ::1] a, double[:, ::1] b):
    """a @ b.T"""
    cdef int m = a.shape[0], n = a.shape[1], k = b.shape[0]
    if k == 0 or m == 0 or n == 0:
        return np.zeros((m, k))
    out = np.empty((m, k))
    cdef double[:, ::1] c = out
    with nogil:
        _gemm_nt(&a[0, 0], &b[0, 0], &c[0, 0], m, n, k)
    return out


def relu(double[:, ::1] x):
    cdef Py_ssize_t i, n = x.shape[0] * x.shape[1]
    out = np.empty((x.shape[0], x.shape[1]))
    cdef double[:, ::1] y = out
    cdef double* xp
    cdef double* yp
    if n:
        xp = &x[0, 0]
        yp = &y[0, 0]
        with nogil:
            for i in range(n):
                yp[i] = xp[i] if xp[i] > 0.0 else 0.0
    return out


def relu_backward(double[:, ::1] gy, double[:, ::1] x):
    cdef Py_ssize_t i, n = x.shape[0] * x.shape[1]
    out = np.empty((x.shape[0], x.shape[1]))
    cdef double[:, ::1] g = out
    cdef double* xp
    cdef double* gyp
    cdef double* gp
    if n:
        xp = &x[0, 0]
        gyp = &gy[0, 0]
        gp = &g[0, 0]
        with nogil:
            for i in range(n):
                gp[i] = gyp[i] if xp[i] > 0.0 else 0.0
    return out


def local_reparam_forward(double[:, ::1] a, double[:, ::1] theta,
                          double[:, ::1] sigma2, double[:, ::1] eps):
    cdef int m = a.shape[0], k = a.shape[1], d = theta.shape[1]
    cdef Py_ssize_t i, n = <Py_ssize_t> m * d
    cdef Py_ssize_t j, na = <Py_ssize_t> m * k
    out = np.empty((m, d))
    delta_arr = np.empty((m, d))
    asq_arr = np.empty((m, k))
    cdef double[:, ::1] b = out
    cdef double[:, ::1] delta = delta_arr
    cdef double[:, ::1] asq = asq_arr
    cdef double* ap = &a[0, 0]
    cdef double* asqp = &asq[0, 0]
    cdef double* bp = &b[0, 0]
    cdef double* dp = &delta[0, 0]
    cdef double* ep = &eps[0, 0]
    with nogil:
        for j in range(na):
            asqp[j] = ap[j] * ap[j]
        # delta temporarily holds the output variances
        _gemm_nn(asqp, &sigma2[0, 0], dp, m, k, d)
        _gemm_nn(ap, &theta[0, 0], bp, m, k, d)
        for i in range(n):
            dp[i] = sqrt(dp[i])
            bp[i] = bp[i] + dp[i] * ep[i]
    return out, delta_arr


def local_reparam_backward(double[:, ::1] gb, double[:, ::1] a,
                           double[:, ::1] theta, double[:, ::1] sigma2,
                           double[:, ::1] delta, double[:, ::1] eps):
    cdef int m = a.shape[0], k = a.shape[1], d = theta.shape[1]
    cdef Py_ssize_t i, n = <Py_ssize_t> m * d
    cdef Py_ssize_t j, na = <Py_ssize_t> m * k
    gd2_arr = np.empty((m, d))
    asq_arr = np.empty((m, k))
    gtheta_arr = np.empty((k, d))
    gsigma2_arr = np.empty((k, d))
    ga_arr = np.empty((m, k))
    gvar_arr = np.empty((m, k))
    cdef double[:, ::1] gd2 = gd2_arr
    cdef double[:, ::1] asq = asq_arr
    cdef double[:, ::1] gtheta = gtheta_arr
    cdef double[:, ::1] gsigma2 = gsigma2_arr
    cdef double[:, ::1] ga = ga_arr
    cdef double[:, ::1] gvar = gvar_arr
    cdef double* gbp = &gb[0, 0]
    cdef double* ap = &a[0, 0]
    cdef double* dp = &delta[0, 0]
    cdef double* ep = &eps[0, 0]
    cdef double* gd2p = &gd2[0, 0]
    cdef double* asqp = &asq[0, 0]
    cdef double* gap = &ga[0, 0]
    cdef double* gvp = &gvar[0, 0]
    with nogil:
        for i in range(n):
            gd2p[i] = gbp[i] * ep[i] / (2.0 * dp[i]) if dp[i] > 0.0 else 0.0
        for j in range(na):
            asqp[j] = ap[j] * ap[j]
        _gemm_tn(ap, gbp, &gtheta[0, 0], m, k, d)
        _gemm_tn(asqp, gd2p, &gsigma2[0, 0], m, k, d)
        _gemm_nt(gbp, &theta[0, 0], gap, m, d, k)
        _gemm_nt(gd2p, &sigma2[0, 0], gvp, m, d, k)
        for j in range(na):
            gap[j] = gap[j] + 2.0 * ap[j] * gvp[j]
    return ga_arr, gtheta_arr, gsigma2_arr


def softmax_xent(double[:, ::1] logits, long long[::1] labels):
    cdef int m = logits.shape[0], c = logits.shape[1]
    cdef Py_ssize_t i, j
    grad_arr = np.empty((m, c))
    cdef double[:, ::1] g = grad_arr
    cdef double loss = 0.0, mx, s, z
    cdef long long lab
    with nogil:
        for i in range(m):
            mx = logits[i, 0]
            for j in range(1, c):
                if logits[i, j] > mx:
                    mx = logits[i, j]
            s = 0.0
            for j in range(c):
                z = exp(logits[i, j] - mx)
                g[i, j] = z
                s += z
            lab = labels[i]
            loss += log(s) - (logits[i, lab] - mx)
            for j in range(c):
                g[i, j] = g[i, j] / (s * m)
            g[i, lab] -= 1.0 / m
    return loss / m, grad_arr


def adam_update(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                long long t, double lr, double beta1, double beta2, double eps):
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double c1 = 1.0 - beta1**t
    cdef double c2 = 1.0 - beta2**t
    with nogil:
        for i in range(n):
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
            v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i])
            p[i] -= lr * (m[i] / c1) / (sqrt(v[i] / c2) + eps)


cdef inline double _sigmoid1(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def penalty_vbd(double[:, ::1] theta, double[:, ::1] sigma2):
    cdef Py_ssize_t i, n = theta.shape[0] * theta.shape[1]
    gt_arr = np.empty((theta.shape[0], theta.shape[1]))
    gl_arr = np.empty((theta.shape[0], theta.shape[1]))
    cdef double[:, ::1] gt = gt_arr
    cdef double[:, ::1] gl = gl_arr
    cdef double val = 0.0, t2, den
    cdef double* tp
    cdef double* sp
    cdef double* gtp
    cdef double* glp
    if n:
        tp = &theta[0, 0]
        sp = &sigma2[0, 0]
        gtp = &gt[0, 0]
        glp = &gl[0, 0]
        with nogil:
            for i in range(n):
                t2 = tp[i] * tp[i]
                den = t2 + sp[i]
                val += 0.5 * log1p(t2 / sp[i])
                gtp[i] = tp[i] / den
                glp[i] = -0.5 * t2 / den
    return val, gt_arr, gl_arr


def penalty_vd(double[:, ::1] theta, double[:, ::1] sigma2,
               double k1, double k2, double k3):
    cdef Py_ssize_t i, n = theta.shape[0] * theta.shape[1]
    gt_arr = np.empty((theta.shape[0], theta.shape[1]))
    gl_arr = np.empty((theta.shape[0], theta.shape[1]))
    cdef double[:, ::1] gt = gt_arr
    cdef double[:, ::1] gl = gl_arr
    cdef double val = 0.0, t2, den, x, sx, sig_d
    cdef double* tp
    cdef double* sp
    cdef double* gtp
    cdef double* glp
    if n:
        tp = &theta[0, 0]
        sp = &sigma2[0, 0]
        gtp = &gt[0, 0]
        glp = &gl[0, 0]
        with nogil:
            for i in range(n):
                t2 = tp[i] * tp[i]
                den = t2 + sp[i]
                x = log(sp[i]) - log(t2)  # log of noise-to-signal ratio
                sx = _sigmoid1(k2 + k3 * x)
                val += k1 - k1 * sx + 0.5 * log1p(t2 / sp[i])
                sig_d = k1 * k3 * sx * (1.0 - sx)
                gtp[i] = (0.0 if tp[i] == 0.0 else 2.0 * sig_d / tp[i]) + tp[i] / den
                glp[i] = -sig_d - 0.5 * t2 / den
    return val, gt_arr, gl_arr
