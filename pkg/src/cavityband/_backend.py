"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. ``CAVITYBAND_BACKEND=python`` forces the fallback.
"""

import os

from . import _purepy

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

AVAILABLE = {"python": _purepy}
if _compiled is not None:
    AVAILABLE["compiled"] = _compiled

_requested = os.environ.get("CAVITYBAND_BACKEND", "").strip().lower()
if _requested and _requested not in ("python", "compiled"):
    raise ImportError(f"CAVITYBAND_BACKEND must be 'python' or 'compiled', got {_requested!r}")
if _requested == "python" or _compiled is None:
    NAME = "python"
else:
    NAME = "compiled"
impl = AVAILABLE[NAME]


def select(name):
    """Switch the active backend; returns the previous name."""
    global impl, NAME
    if name not in AVAILABLE:
        raise ValueError(f"backend {name!r} not available (have {sorted(AVAILABLE)})")
    previous = NAME
    NAME = name
    impl = AVAILABLE[name]
    return previous
