"""Backend selection for the hot numeric kernels.

``XAL_BACKEND=numpy`` forces the pure-numpy path, ``XAL_BACKEND=numba``
requires the compiled path, unset prefers numba and falls back to numpy
when it is unavailable. ``BACKEND`` names the active choice;
``benchmarks/bench_backends.py`` compares the two.
"""

from __future__ import annotations

import os

from . import numpy_impl

_requested = os.environ.get("XAL_BACKEND", "").strip().lower()

if _requested == "numpy":
    _impl = numpy_impl
    BACKEND = "numpy"
elif _requested in ("", "numba"):
    try:
        from . import numba_impl as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _impl = numpy_impl
        BACKEND = "numpy"
else:
    raise ValueError(
        f"XAL_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

logistic_gd = _impl.logistic_gd
best_stump = _impl.best_stump
lloyd = _impl.lloyd
best_cut = _impl.best_cut

__all__ = ["BACKEND", "logistic_gd", "best_stump", "lloyd", "best_cut"]
