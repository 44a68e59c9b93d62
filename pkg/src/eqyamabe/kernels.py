"""Select the compiled stencil kernels when available, numpy otherwise.

Set ``EQYAMABE_PURE_PYTHON=1`` to force the numpy path.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("EQYAMABE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

matvec_dot = _impl.matvec_dot
cg_update = _impl.cg_update
xpby = _impl.xpby


def get_backend(name=None):
    """Kernel module by name (``"cython"`` or ``"python"``); default is the selected one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
