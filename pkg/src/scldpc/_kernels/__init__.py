"""Hot loops behind the density and scalar engines.

Two interchangeable implementations live here: ``_numba`` (compiled with
``numba.njit``) and ``_numpy`` (vectorised, no compilation).  The active one
is chosen once at import time from the ``SCLDPC_BACKEND`` environment
variable (``numba`` or ``numpy``); when unset, numba is used if it imports.
Both modules expose the same functions with the same signatures.
"""

import os

from . import _numpy

_requested = os.environ.get("SCLDPC_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ImportError(f"SCLDPC_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _numba
    except ImportError:
        if _requested == "numba":
            raise
        _impl = _numpy
        BACKEND = "numpy"
    else:
        _impl = _numba
        BACKEND = "numba"

chk_pairs = _impl.chk_pairs
lin_conv = _impl.lin_conv
bec_step = _impl.bec_step
bec_forward = _impl.bec_forward

__all__ = ["BACKEND", "chk_pairs", "lin_conv", "bec_step", "bec_forward"]
