"""Kernel selection: the compiled extension when it is importable, the
pure-Python module otherwise. Set ``BPMNCHECK_PURE_PYTHON=1`` to force
the fallback."""

import os

from . import _kernel_py

try:
    if os.environ.get("BPMNCHECK_PURE_PYTHON"):
        raise ImportError("pure Python requested")
    from . import _kernel as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _kernel_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

DEFAULT = "cython" if _compiled is not None else "python"


def get(name=None):
    """Return the kernel module for ``name`` (default: best available)."""
    name = name or DEFAULT
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
