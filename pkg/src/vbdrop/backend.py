"""Kernel backend selection.

The compiled extension is preferred when it imports; otherwise the numpy
implementation is used.  Set VBDROP_PURE=1 to force the numpy path (useful
for benchmarking and for debugging suspected kernel issues).  Call sites go
through ``backend.kernels`` so tests can swap the implementation.
"""

import os

from . import _kernels_np

if os.environ.get("VBDROP_PURE"):
    kernels = _kernels_np
else:
    try:
        from . import _kernels_c as _ext

        kernels = _ext
    except ImportError:
        kernels = _kernels_np

HAVE_EXT = kernels is not _kernels_np


def name():
    return "cython" if kernels is not _kernels_np else "numpy"
