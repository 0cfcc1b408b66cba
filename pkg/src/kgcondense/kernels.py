"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
twin. Set ``KGCONDENSE_PURE_PYTHON=1`` to force the fallback.
"""
import os
from types import ModuleType

from . import _pykernels

try:
    from . import _kernels as _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

if _ckernels is not None and os.environ.get("KGCONDENSE_PURE_PYTHON", "") in ("", "0"):
    default = _ckernels
else:
    default = _pykernels

BACKEND = default.NAME


def get(backend: "str | ModuleType | None" = None) -> ModuleType:
    """Resolve a backend name (``"python"``/``"cython"``) or module to a kernel module."""
    if backend is None:
        return default
    if isinstance(backend, ModuleType):
        return backend
    try:
        return BACKENDS[backend]
    except KeyError:
        raise ValueError(
            f"unknown kernel backend {backend!r}; available: {sorted(BACKENDS)}"
        ) from None
