"""Stepping-loop backend, chosen once at import.

The compiled extension is used when it was built; set ``PTDIMER_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _kernels_py

if os.environ.get("PTDIMER_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

propagate_record = _impl.propagate_record
absorb_steps = _impl.absorb_steps

__all__ = ["BACKEND", "propagate_record", "absorb_steps"]
