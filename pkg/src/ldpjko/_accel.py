"""Select the compiled kernels when available, else the numpy fallback.

Set ``LDPJKO_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
lse_rows = _kernels_py.lse_rows

if os.environ.get("LDPJKO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        lse_rows = _compiled.lse_rows
        BACKEND = "cython"

__all__ = ["BACKEND", "lse_rows"]
