"""Kernel backend selection.

The compiled extension is preferred; the numpy implementation is used when
it is not built or when ``PROPEFFECT_PURE_PYTHON`` is set to a non-empty
value other than ``0``.
"""
import os

from . import _kernels_py

_force_pure = os.environ.get("PROPEFFECT_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_pure:
        raise ImportError("pure python backend forced")
    from . import _kernels as kernels
except ImportError:
    kernels = _kernels_py

BACKEND = kernels.NAME


def available():
    """Names of the importable backends."""
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return names
    return ["cython"] + names


def get(name=None):
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
