"""Selects the compiled integrators when available, numpy otherwise.

Set ``KERRQRC_PURE_PYTHON=1`` to force the numpy path.
"""

import os

from . import _fallback

if os.environ.get("KERRQRC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    NAME = "python"
else:
    try:
        from . import _kernels as _impl
        NAME = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
        NAME = "python"

lindblad_rhs = _impl.lindblad_rhs
propagate_lindblad = _impl.propagate_lindblad
propagate_classical = _impl.propagate_classical
integrate_mackey_glass = _impl.integrate_mackey_glass
integrate_rossler = _impl.integrate_rossler

__all__ = [
    "NAME",
    "lindblad_rhs",
    "propagate_lindblad",
    "propagate_classical",
    "integrate_mackey_glass",
    "integrate_rossler",
]
