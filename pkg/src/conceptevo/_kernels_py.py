"""Numpy fallback for the compiled retrieval kernels."""
import numpy as np


def successor_counts(indptr: np.ndarray, indices: np.ndarray, member: np.ndarray) -> np.ndarray:
    n = len(indptr) - 1
    if len(indices) == 0:
        return np.zeros(n, dtype=np.int64)
    hits = np.asarray(member, dtype=np.int64)[indices]
    # reduceat misbehaves on empty rows, so go through a cumulative sum.
    csum = np.concatenate(([0], np.cumsum(hits)))
    return csum[indptr[1:]] - csum[indptr[:-1]]


def count_and(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.count_nonzero(np.logical_and(a, b)))
