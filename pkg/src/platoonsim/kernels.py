"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise, or when the
``PLATOONSIM_PURE_PYTHON`` environment variable is set to a non-empty value,
the NumPy fallback is used.
"""

import importlib
import os

from . import _kernels_py


def load_backend(name: str):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        return importlib.import_module("platoonsim._kernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    names = ["python"]
    try:
        load_backend("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


if os.environ.get("PLATOONSIM_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        _impl = load_backend("cython")
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

social_repulsion = _impl.social_repulsion
resolve_pairs = _impl.resolve_pairs
contact_matrix = _impl.contact_matrix
wall_repulsion = _impl.wall_repulsion
resolve_walls = _impl.resolve_walls
clearance_scan = _impl.clearance_scan
