# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled CSR kernels.

Semantics must match :mod:`nodemoe._fallback` exactly; both are exercised
by the same tests through :mod:`nodemoe.kernels`.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def csr_spmm(const cnp.int64_t[::1] offsets,
             const cnp.int64_t[::1] targets,
             const double[::1] row_scale,
             const double[::1] col_scale,
             const double[:, ::1] x):
    """out[i] = row_scale[i] * sum_{j in N(i)} col_scale[j] * x[j]."""
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t i, p, j, c
    cdef double w, r
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            for p in range(offsets[i], offsets[i + 1]):
                j = targets[p]
                w = col_scale[j]
                for c in range(d):
                    out[i, c] += w * x[j, c]
            r = row_scale[i]
            for c in range(d):
                out[i, c] *= r
    return out_arr


def same_label_counts(const cnp.int64_t[::1] offsets,
                      const cnp.int64_t[::1] targets,
                      const cnp.int64_t[::1] labels):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t i, p
    cdef cnp.int64_t cnt
    out_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    with nogil:
        for i in range(n):
            cnt = 0
            for p in range(offsets[i], offsets[i + 1]):
                if labels[targets[p]] == labels[i]:
                    cnt += 1
            out[i] = cnt
    return out_arr


def label_propagation_sweep(const cnp.int64_t[::1] offsets,
                            const cnp.int64_t[::1] targets,
                            const cnp.int64_t[::1] order,
                            cnp.int64_t[::1] labels,
                            cnp.int64_t[::1] counts):
    """One asynchronous sweep in the given node order; returns #changes.

    ``counts`` is caller-owned scratch of length n, all zeros on entry and
    on exit. Ties go to the lowest label id.
    """
    cdef Py_ssize_t k, p, i
    cdef cnp.int64_t lab, best, best_count, changes = 0
    with nogil:
        for k in range(order.shape[0]):
            i = order[k]
            if offsets[i + 1] == offsets[i]:
                continue
            for p in range(offsets[i], offsets[i + 1]):
                counts[labels[targets[p]]] += 1
            best = -1
            best_count = 0
            for p in range(offsets[i], offsets[i + 1]):
                lab = labels[targets[p]]
                if counts[lab] > best_count or (counts[lab] == best_count and lab < best):
                    best = lab
                    best_count = counts[lab]
            for p in range(offsets[i], offsets[i + 1]):
                counts[labels[targets[p]]] = 0
            if best != labels[i]:
                labels[i] = best
                changes += 1
    return changes
