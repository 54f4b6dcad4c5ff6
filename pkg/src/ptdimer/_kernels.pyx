# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-stepping loops. Signatures mirror ``_kernels_py``."""
import numpy as np

from libc.math cimport exp, log, sqrt
from scipy.linalg.cython_blas cimport zgemv

ctypedef double complex cplx


cdef inline void _matvec(cplx[:, ::1] U, cplx* x, cplx* y) noexcept nogil:
    # U is C-ordered, so BLAS sees U^T; 'T' undoes it without conjugation
    cdef char trans = b'T'
    cdef int n = <int>U.shape[0]
    cdef int inc = 1
    cdef cplx one = 1.0
    cdef cplx zero = 0.0
    zgemv(&trans, &n, &n, &one, &U[0, 0], &n, x, &inc, &zero, y, &inc)


cdef inline double _norm(cplx* x, Py_ssize_t n) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        s += x[i].real * x[i].real + x[i].imag * x[i].imag
    return sqrt(s)


def propagate_record(cplx[:, ::1] U, cplx[::1] u0, Py_ssize_t n_steps):
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t step, i
    cdef double s
    cdef bint dead = False
    if u0.shape[0] != n:
        raise ValueError("state length does not match propagator")
    states = np.empty((n_steps + 1, n), dtype=complex)
    logs = np.empty(n_steps + 1)
    cdef cplx[:, ::1] S = states
    cdef double[::1] L = logs
    s = _norm(&u0[0], n)
    if s == 0.0:
        raise ValueError("initial state is zero")
    for i in range(n):
        S[0, i] = u0[i] / s
    L[0] = log(s)
    with nogil:
        for step in range(1, n_steps + 1):
            _matvec(U, &S[step - 1, 0], &S[step, 0])
            s = _norm(&S[step, 0], n)
            if s == 0.0:
                dead = True
                break
            for i in range(n):
                S[step, i] = S[step, i] / s
            L[step] = L[step - 1] + log(s)
    if dead:
        raise FloatingPointError("state annihilated by propagator")
    return states, logs


def absorb_steps(cplx[:, ::1] U, cplx[::1] u, Py_ssize_t n_steps,
                 double log_amp, double log_drift, double[::1] acc):
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t nd = n // 2
    cdef Py_ssize_t step, i, j
    cdef double s, w
    cdef bint dead = False
    if u.shape[0] != n or acc.shape[0] != nd:
        raise ValueError("array shapes do not match propagator")
    buf = np.empty(n, dtype=complex)
    cdef cplx[::1] V = buf
    with nogil:
        for step in range(n_steps):
            _matvec(U, &u[0], &V[0])
            s = _norm(&V[0], n)
            if s == 0.0:
                dead = True
                break
            log_amp += log(s) + log_drift
            w = exp(2.0 * log_amp)
            for i in range(n):
                u[i] = V[i] / s
            for j in range(nd):
                i = 2 * j + 1
                acc[j] += w * (u[i].real * u[i].real + u[i].imag * u[i].imag)
    if dead:
        raise FloatingPointError("state annihilated by propagator")
    return log_amp
