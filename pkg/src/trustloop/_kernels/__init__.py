"""Kernel backend selection.

The compiled extension carries the hot inner loops (per-sample net
forward/backward, the O(n^2) quadrant statistic); a numpy implementation is
the drop-in fallback when the extension is unavailable. Set
``TRUSTLOOP_KERNELS=python`` or ``=compiled`` to force a backend.
"""

from __future__ import annotations

import os

from . import _ref

ACT_TANH = _ref.ACT_TANH
ACT_RELU = _ref.ACT_RELU


def _select():
    requested = os.environ.get("TRUSTLOOP_KERNELS", "").strip().lower()
    if requested == "python":
        return _ref
    try:
        from . import _core
    except ImportError:
        if requested == "compiled":
            raise ImportError(
                "TRUSTLOOP_KERNELS=compiled but the compiled extension is not "
                "importable; rebuild the package or unset the variable"
            ) from None
        return _ref
    return _core


def available_backends() -> dict[str, object]:
    """Importable backends keyed by name; used by tests and the benchmark."""
    backends: dict[str, object] = {"python": _ref}
    try:
        from . import _core

        backends["compiled"] = _core
    except ImportError:
        pass
    return backends


_impl = _select()

backend_name: str = _impl.BACKEND_NAME
forward_value = _impl.forward_value
forward_backward = _impl.forward_backward
ks2d_stat = _impl.ks2d_stat
