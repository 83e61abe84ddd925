# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled linear Gaussian recursion; same contract as ``_propagate_py.propagate``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def propagate(Phi, x0, w, Py_ssize_t stride):
    cdef double[:, ::1] P = np.ascontiguousarray(Phi, dtype=np.float64)
    cdef double[:, ::1] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[1]
    cdef Py_ssize_t r = P.shape[0] - n
    cdef Py_ssize_t steps = W.shape[0]
    cdef Py_ssize_t nstore = (steps + stride - 1) // stride if stride > 0 else 0
    z_arr = np.empty((steps, r))
    states_arr = np.empty((nstore, n))
    x_arr = np.array(x0, dtype=np.float64)
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] states = states_arr
    cdef double[::1] x = x_arr
    cdef double[::1] tmp = np.empty(n)
    cdef Py_ssize_t k, i, j
    cdef double acc
    for k in range(steps):
        if stride > 0 and k % stride == 0:
            for i in range(n):
                states[k // stride, i] = x[i]
        for i in range(r):
            acc = 0.0
            for j in range(n):
                acc = acc + P[n + i, j] * x[j]
            z[k, i] = acc + W[k, n + i]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc = acc + P[i, j] * x[j]
            tmp[i] = acc + W[k, i]
        for i in range(n):
            x[i] = tmp[i]
    return z_arr, states_arr, x_arr
