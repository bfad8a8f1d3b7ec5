"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Set ``CRLFLOOD_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BUFFER = _kernels_py.BUFFER
PROPORTIONAL = _kernels_py.PROPORTIONAL
OK = _kernels_py.OK
OVERSHOOT = _kernels_py.OVERSHOOT


def _load():
    if os.environ.get("CRLFLOOD_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py, "python"
    try:
        from . import _kernels
    except ImportError:
        return _kernels_py, "python"
    return _kernels, "compiled"


impl, BACKEND = _load()


def backends():
    """Return ``{name: module}`` for every backend importable here."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        found["compiled"] = _kernels
    return found
