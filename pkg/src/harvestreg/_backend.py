"""Pick the compiled kernel when available; ``HARVESTREG_PURE=1`` forces numpy."""
from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _kernels_py}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


def get_backend(name: str | None = None):
    if name is None:
        name = "python" if os.environ.get("HARVESTREG_PURE") == "1" or _ckernels is None else "cython"
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available (have: {sorted(BACKENDS)})") from None


def default_backend_name() -> str:
    return get_backend().NAME
