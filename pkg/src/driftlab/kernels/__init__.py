"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set DRIFTLAB_PURE=1 to force the numpy kernels regardless of whether
the compiled module was built.
"""

from __future__ import annotations

import os

from . import pure

if os.environ.get("DRIFTLAB_PURE", "") not in ("", "0"):
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

forward_one = _impl.forward_one
forward_batch = _impl.forward_batch
grad_batch = _impl.grad_batch

__all__ = ["BACKEND", "forward_one", "forward_batch", "grad_batch", "pure"]
