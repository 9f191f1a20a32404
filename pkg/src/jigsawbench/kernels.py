"""Hot-kernel dispatch.

The compiled extension ``jigsawbench._kernels`` is used when it imports;
otherwise the numpy fallback in ``_kernels_py`` is used. Setting
``JIGSAWBENCH_PURE=1`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("JIGSAWBENCH_PURE", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND
convex_clip_area = _impl.convex_clip_area
coverage = _impl.coverage
label_components = _impl.label_components


def compiled_available() -> bool:
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True


def backend_module(name: str):
    """Return the kernel module for ``"python"`` or ``"cython"``."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
