"""Pick the compiled kernels when available.

Set ``RULLS_BACKEND=python`` to force the NumPy fallback, or
``RULLS_BACKEND=cython`` to fail loudly when the extension is missing.
"""

import os

from . import _kernels_py

_requested = os.environ.get("RULLS_BACKEND", "auto").lower()

if _requested == "python":
    kernels = _kernels_py
else:
    try:
        from . import _ckernels as kernels
    except ImportError:
        if _requested == "cython":
            raise
        kernels = _kernels_py

BACKEND = "cython" if kernels is not _kernels_py else "python"


def get_kernels(name=None):
    """Return a kernel module by name ("cython" / "python"), default: the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
