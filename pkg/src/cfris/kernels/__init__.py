"""Compute backends for the closed-form NMSE evaluation.

The compiled extension is preferred when it imported cleanly; the numpy
implementation is always available.  ``CFRIS_KERNEL=numpy`` or
``CFRIS_KERNEL=cython`` in the environment forces a choice at import time.
"""

from __future__ import annotations

import os
import warnings

from ..errors import ConfigurationError
from . import numpy_backend

try:
    from . import _core
except ImportError:  # pragma: no cover - depends on the build
    _core = None

_BACKENDS = {"numpy": numpy_backend.nmse_matrix}
if _core is not None:
    _BACKENDS["cython"] = _core.nmse_matrix


def _default_backend() -> str:
    forced = os.environ.get("CFRIS_KERNEL", "").strip().lower()
    if forced:
        if forced not in ("numpy", "cython"):
            raise ConfigurationError(
                f"CFRIS_KERNEL must be 'numpy' or 'cython', got {forced!r}"
            )
        if forced == "cython" and _core is None:
            warnings.warn(
                "CFRIS_KERNEL=cython requested but the compiled core is "
                "unavailable; falling back to numpy",
                RuntimeWarning,
            )
            return "numpy"
        return forced
    return "cython" if _core is not None else "numpy"


_ACTIVE = _default_backend()


def active_backend() -> str:
    """Name of the backend used when none is requested explicitly."""
    return _ACTIVE


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_kernel(name: str | None = None):
    """Resolve a backend name ('numpy', 'cython' or None for the default)."""
    if name is None:
        name = _ACTIVE
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown kernel backend {name!r}; available: {available_backends()}"
        ) from None
