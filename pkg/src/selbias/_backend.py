"""Kernel backend selection.

The Monte Carlo kernels exist twice: a numba ``@njit`` version and a
vectorised pure-numpy version. The numba path is used when numba imports and
``SELBIAS_DISABLE_NUMBA`` is unset (or ``0``). Both paths consume the same
counter-based random stream, so they agree up to libm rounding.
"""

from __future__ import annotations

import os

_FALSE = {"", "0", "false", "no", "off"}

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAS_NUMBA = False

DISABLED_BY_ENV = os.environ.get("SELBIAS_DISABLE_NUMBA", "").strip().lower() not in _FALSE

_active = "numba" if HAS_NUMBA and not DISABLED_BY_ENV else "numpy"


def active() -> str:
    """Name of the backend currently used by the simulation modules."""
    return _active


def set_backend(name: str) -> str:
    """Switch backend at runtime; returns the previous one.

    Intended for tests and the benchmark script. Production runs select the
    backend once through the environment flag.
    """
    global _active
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba is not importable")
    previous, _active = _active, name
    return previous


def kernels():
    """Return the kernel module for the active backend."""
    if _active == "numba":
        from . import _kernels_numba as mod
    else:
        from . import _kernels_numpy as mod
    return mod
