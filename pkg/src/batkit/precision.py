"""Process-wide float width selection.

Everything computes in 32-bit by default. Setting the environment variable
``BATKIT_F64=1`` (or calling :func:`set_float64`) switches newly created
tensors and parameters to 64-bit, which the verification tooling
(finite-difference checks, function-preservation audits) relies on for its
tighter tolerances.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

import numpy as np

_float64 = os.environ.get("BATKIT_F64", "") == "1"


def float64_enabled() -> bool:
    return _float64


def active_dtype() -> np.dtype:
    """dtype for newly created tensors/parameters."""
    return np.dtype(np.float64 if _float64 else np.float32)


def set_float64(enabled: bool) -> None:
    global _float64
    _float64 = bool(enabled)


@contextmanager
def float64_mode(enabled: bool = True):
    """Temporarily switch the process float width (not thread-safe)."""
    previous = _float64
    set_float64(enabled)
    try:
        yield
    finally:
        set_float64(previous)
