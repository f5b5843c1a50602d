"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise (or
when ``WSDFM_PURE_PYTHON=1``) the numpy fallback is used. Both expose
``knn_indices``, ``histogram2d``, ``categorical_rows`` and ``pair_posterior``.
"""
import os

from . import _fallback

if os.environ.get("WSDFM_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

knn_indices = _impl.knn_indices
histogram2d = _impl.histogram2d
categorical_rows = _impl.categorical_rows
pair_posterior = _impl.pair_posterior

__all__ = ["BACKEND", "knn_indices", "histogram2d", "categorical_rows", "pair_posterior"]
