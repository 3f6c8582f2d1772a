"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the NumPy
fallback is otherwise used transparently.  Setting WHILTER_PURE_PYTHON=1
forces the fallback (useful for benchmarking and debugging).  The two
backends agree to floating-point tolerance, not bit-for-bit, so a fixed
backend choice is part of a run's reproducibility contract.
"""

import os

from . import _kernels_np


def _select(env):
    if env.get("WHILTER_PURE_PYTHON", "").strip().lower() in {"1", "true", "yes"}:
        return _kernels_np
    try:
        from . import _kernels  # compiled, may be absent

        return _kernels
    except ImportError:
        return _kernels_np


kernels = _select(os.environ)


def backend_name():
    return kernels.BACKEND_NAME


def compiled_available():
    try:
        from . import _kernels  # noqa: F401

        return True
    except ImportError:
        return False
