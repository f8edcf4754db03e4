"""Kernel backend selection: compiled extension if available, NumPy otherwise.

``ROADSLICE_KERNELS=python`` forces the NumPy fallback;
``ROADSLICE_KERNELS=compiled`` makes a missing extension a hard error.
"""

from __future__ import annotations

import os


def _load():
    forced = os.environ.get("ROADSLICE_KERNELS")
    if forced == "python":
        from . import _kernels_np

        return _kernels_np, "python"
    try:
        from . import _kernels  # compiled

        return _kernels, "compiled"
    except ImportError:
        if forced == "compiled":
            raise ImportError(
                "ROADSLICE_KERNELS=compiled but the extension is not built; "
                "run 'pip install -e . --no-build-isolation'"
            )
        from . import _kernels_np

        return _kernels_np, "python"


kernels, BACKEND_NAME = _load()


def backend_name() -> str:
    """Which kernel implementation is active: 'compiled' or 'python'."""
    return BACKEND_NAME
