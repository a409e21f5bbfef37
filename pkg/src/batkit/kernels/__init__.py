"""Hot-kernel backend selection.

Two interchangeable backends implement the fused inner-loop kernels (GeLU,
layernorm, softmax, cross-entropy, Adam):

* ``reference`` - plain numpy, always available;
* ``compiled``  - the Cython extension ``batkit.kernels._fast``, built at
  install time when a C toolchain is present.

The compiled backend is preferred when importable. ``BATKIT_PURE=1`` forces
the reference backend; :func:`use` switches at runtime (the benchmark uses
this to compare both). Matrix multiplication is not a kernel here - both
backends leave it to numpy's BLAS.
"""

from __future__ import annotations

import os

from . import reference

try:
    from . import _fast
except ImportError:
    _fast = None

_BACKENDS = {"reference": reference}
if _fast is not None:
    _BACKENDS["compiled"] = _fast

active = reference
if _fast is not None and os.environ.get("BATKIT_PURE", "") != "1":
    active = _fast


def backend_name() -> str:
    return active.NAME


def available() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def use(name: str):
    """Select the active backend by name; returns the previous module."""
    global active
    if name not in _BACKENDS:
        raise KeyError(f"unknown kernel backend {name!r}; have {available()}")
    previous = active
    active = _BACKENDS[name]
    return previous
