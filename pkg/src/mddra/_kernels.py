"""Kernel dispatch: the compiled ``_core`` when importable, else ``_fallback``.

Set ``MDDRA_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os
from types import ModuleType

from mddra import _fallback


def _load_compiled() -> ModuleType | None:
    try:
        from mddra import _core
    except ImportError:
        return None
    return _core


_compiled = _load_compiled()

if _compiled is not None and not os.environ.get("MDDRA_PURE_PYTHON"):
    _impl: ModuleType = _compiled
    BACKEND = "compiled"
else:
    _impl = _fallback
    BACKEND = "python"


def backend(name: str) -> ModuleType:
    """Return a specific kernel module (``"compiled"`` or ``"python"``)."""
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise ImportError("mddra._core is not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


sliding_mean = _impl.sliding_mean
partition_dp = _impl.partition_dp
gini_best_split = _impl.gini_best_split
xoshiro256ss = _impl.xoshiro256ss

__all__ = [
    "BACKEND",
    "backend",
    "sliding_mean",
    "partition_dp",
    "gini_best_split",
    "xoshiro256ss",
]
