"""Kernel backend selection.

The compiled extension (loopslam._kernels_c) and the numpy fallback
(loopslam.kernels._numpy) implement the same four routines with identical
integer semantics. Selection order:

  LOOPSLAM_KERNELS=c     require the extension, raise if missing
  LOOPSLAM_KERNELS=py    force the numpy fallback
  LOOPSLAM_KERNELS=auto  (default) extension if importable, else numpy
"""

import os

from . import _numpy

FAST_CIRCLE = _numpy.FAST_CIRCLE

_choice = os.environ.get("LOOPSLAM_KERNELS", "auto").lower()
if _choice not in ("auto", "c", "py"):
    raise ValueError("LOOPSLAM_KERNELS must be auto, c, or py (got %r)" % _choice)

if _choice == "py":
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from loopslam import _kernels_c as _impl
        BACKEND = "c"
    except ImportError:
        if _choice == "c":
            raise
        _impl = _numpy
        BACKEND = "numpy"

box_blur9 = _impl.box_blur9
fast_corners = _impl.fast_corners
brief_describe = _impl.brief_describe
hamming_cdist = _impl.hamming_cdist
