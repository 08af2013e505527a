"""Compiled Kaczmarz trial loop (same contract as _trial_py.run_trial_errors)."""

import numpy as np


def run_trial_errors(const double[:, ::1] a, const double[::1] y,
                     const double[::1] inv_norms_sq, const long long[::1] rows,
                     const double[::1] x0, const double[::1] x_true):
    cdef Py_ssize_t k_max = rows.shape[0]
    cdef Py_ssize_t n = a.shape[1]
    cdef Py_ssize_t t, j
    cdef long long i
    cdef double dot, r, s, d

    errs_arr = np.empty(k_max + 1)
    x_arr = np.array(x0, dtype=np.float64)
    cdef double[::1] errs = errs_arr
    cdef double[::1] x = x_arr

    with nogil:
        s = 0.0
        for j in range(n):
            d = x[j] - x_true[j]
            s += d * d
        errs[0] = s
        for t in range(k_max):
            i = rows[t]
            dot = 0.0
            for j in range(n):
                dot += a[i, j] * x[j]
            r = (y[i] - dot) * inv_norms_sq[i]
            for j in range(n):
                x[j] += r * a[i, j]
            s = 0.0
            for j in range(n):
                d = x[j] - x_true[j]
                s += d * d
            errs[t + 1] = s
    return errs_arr
