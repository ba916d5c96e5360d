"""Selects the rollout kernel implementation at import time.

The compiled Cython core is preferred; the pure-Python twin is used when the
extension is missing or when NEURAL_SA_BACKEND=python is set. Both produce
bit-identical trajectories (see `bench.py`, which measures the speed gap and
checks parity).
"""

from __future__ import annotations

import os

from . import _kernel_py

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built; fall back to the reference kernel
    _compiled = None

_active = None


def _initial_choice():
    forced = os.environ.get("NEURAL_SA_BACKEND", "").strip().lower()
    if forced == "python":
        return _kernel_py
    if forced == "cython":
        if _compiled is None:
            raise ImportError("NEURAL_SA_BACKEND=cython but the extension is not built")
        return _compiled
    if forced:
        raise ValueError(f"unknown NEURAL_SA_BACKEND {forced!r}; use 'cython' or 'python'")
    return _compiled if _compiled is not None else _kernel_py


def kernel():
    global _active
    if _active is None:
        _active = _initial_choice()
    return _active


def active_backend() -> str:
    return "cython" if kernel() is _compiled and _compiled is not None else "python"


def have_cython() -> bool:
    return _compiled is not None


def set_backend(name: str):
    """Force a backend ('cython' or 'python'); returns the kernel module."""
    global _active
    if name == "python":
        _active = _kernel_py
    elif name == "cython":
        if _compiled is None:
            raise ImportError("cython kernel is not built")
        _active = _compiled
    else:
        raise ValueError(f"unknown backend {name!r}")
    return _active
