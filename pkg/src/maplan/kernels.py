"""Backend selection for the relaxation kernels.

The compiled extension is used when it was built; otherwise the pure-Python
twin is loaded.  ``MAPLAN_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _pykernels

if os.environ.get("MAPLAN_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"
RelaxedTask = _impl.RelaxedTask
PyRelaxedTask = _pykernels.RelaxedTask
INF = _pykernels.INF
