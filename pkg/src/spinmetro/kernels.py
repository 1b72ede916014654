"""Backend selection for the hot kernels.

The compiled extension is used when it was built and ``SPINMETRO_PURE_PYTHON``
is unset; otherwise the numpy implementations are used. ``BACKEND`` names the
active one.
"""

import os

from . import _pykernels

if os.environ.get("SPINMETRO_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "compiled" if _impl is not _pykernels else "python"

decay_weighted_square_sum = _impl.decay_weighted_square_sum
lm_fit = _impl.lm_fit

__all__ = ["BACKEND", "decay_weighted_square_sum", "lm_fit"]
