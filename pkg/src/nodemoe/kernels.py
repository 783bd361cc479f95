"""Kernel dispatch: compiled Cython core when importable, numpy otherwise.

Set ``NODEMOE_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and by the parity tests).
"""
import os

from . import _fallback

BACKEND = "python"

if os.environ.get("NODEMOE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

csr_spmm = _impl.csr_spmm
same_label_counts = _impl.same_label_counts
label_propagation_sweep = _impl.label_propagation_sweep

__all__ = ["BACKEND", "csr_spmm", "same_label_counts", "label_propagation_sweep"]
