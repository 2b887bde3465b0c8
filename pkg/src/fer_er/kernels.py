"""Kernel selection: compiled extension when available, Python otherwise.

Set ``FER_ER_PURE=1`` to force the Python versions.
"""
import os

from . import _kernels_py

BACKEND = "python"
skew_jacobi = _kernels_py.skew_jacobi

if not os.environ.get("FER_ER_PURE"):
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        skew_jacobi = _kernels.skew_jacobi
        BACKEND = "compiled"
