"""Kernel backend selection.

The compiled extension is used when it was built; set
``CONCEPTEVO_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("CONCEPTEVO_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        pass


def successor_counts(indptr: np.ndarray, indices: np.ndarray, member: np.ndarray) -> np.ndarray:
    """Count, for every instance, its successors inside ``member`` (a bool mask)."""
    return _impl.successor_counts(indptr, indices, member.view(np.uint8))


# numpy's vectorized count is already faster than the compiled loop was.
count_and = _kernels_py.count_and
