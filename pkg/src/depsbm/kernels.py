"""Kernel backend selection.

The compiled extension is used when it imports; set ``DEPSBM_BACKEND=python``
to force the numpy fallback (or ``cython`` to require the extension).
"""

import os

_choice = os.environ.get("DEPSBM_BACKEND", "auto").lower()

if _choice == "python":
    from . import _kernels_py as impl
else:
    try:
        from . import _kernels as impl
    except ImportError:
        if _choice == "cython":
            raise
        from . import _kernels_py as impl

BACKEND = impl.BACKEND
SideKernel = impl.SideKernel
log_likelihood = impl.log_likelihood


def get_backend(name):
    """Return the kernel module for ``name`` ("python" or "cython")."""
    if name == "python":
        from . import _kernels_py

        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
