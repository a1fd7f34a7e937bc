"""Selects the compiled kernels or the numpy fallback.

``RCPANEL_BACKEND`` may be ``auto`` (default), ``compiled`` or ``python``.
"""

from __future__ import annotations

import contextlib
import os

from . import _fallback, _rng

try:
    from . import _kernels as _compiled

    _compiled.init_tables(_rng.ZIG_K, _rng.ZIG_W, _rng.ZIG_F)
except ImportError:  # extension not built
    _compiled = None

_active = None


def _select(name: str):
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not available; rebuild the package")
        return _compiled
    if name == "auto":
        return _compiled if _compiled is not None else _fallback
    raise ValueError(f"unknown backend {name!r}")


def kernels():
    return _active


def name() -> str:
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def compiled_available() -> bool:
    return _compiled is not None


def set_backend(choice: str) -> None:
    global _active
    _active = _select(choice)


@contextlib.contextmanager
def use_backend(choice: str):
    """Temporarily switch backend (used by tests and the benchmark)."""
    global _active
    previous = _active
    _active = _select(choice)
    try:
        yield
    finally:
        _active = previous


set_backend(os.environ.get("RCPANEL_BACKEND", "auto"))
