"""Backend selection: the compiled kernel if it imports, else pure Python.

Set ``PROXFLOW_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os

from .errors import ArgumentError

try:
    from . import _kernels
except ImportError:  # no compiler at install time
    _kernels = None

HAVE_COMPILED = _kernels is not None


def default_backend():
    if os.environ.get("PROXFLOW_BACKEND", "").lower() == "python":
        return "python"
    return "compiled" if HAVE_COMPILED else "python"


def resolve(backend=None):
    """Return ``"compiled"`` or ``"python"`` for a requested backend name."""
    if backend is None or backend == "auto":
        return default_backend()
    if backend not in ("compiled", "python"):
        raise ArgumentError(f"unknown backend {backend!r}")
    if backend == "compiled" and not HAVE_COMPILED:
        raise ArgumentError("compiled backend requested but the extension is not built")
    return backend
