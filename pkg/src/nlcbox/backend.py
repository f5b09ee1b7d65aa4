"""Kernel backend selection: compiled Cython core with NumPy fallback.

The compiled module is optional; absence (or NLCBOX_FORCE_FALLBACK=1 in
the environment) selects the NumPy reference kernels.  Both expose the
same functions and are cross-checked by the parity tests.
"""

from __future__ import annotations

import os

from . import _core_py

kernels = _core_py
if os.environ.get("NLCBOX_FORCE_FALLBACK", "") != "1":
    try:
        from . import _core_cy as _compiled

        kernels = _compiled
    except ImportError:
        pass


def backend_name() -> str:
    return kernels.NAME


def available_backends():
    out = {"numpy": _core_py}
    try:
        from . import _core_cy as _compiled

        out["compiled"] = _compiled
    except ImportError:
        pass
    return out
