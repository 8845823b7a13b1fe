# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled retrieval kernels. Same contract as ``_kernels_py``.

Mask popcounts stay in numpy, whose SIMD loop beats a scalar one here.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def successor_counts(const cnp.int64_t[:] indptr, const cnp.int64_t[:] indices,
                     const unsigned char[:] member):
    """Per source node, the number of successors whose ``member`` flag is set."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, j
    cdef int c
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[:] o = out
    with nogil:
        for i in range(n):
            c = 0
            for j in range(indptr[i], indptr[i + 1]):
                c += member[indices[j]]
            o[i] = c
    return out

