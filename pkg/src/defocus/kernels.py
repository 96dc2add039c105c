"""Backend dispatch for the hot raster kernels.

Two interchangeable implementations exist:

* ``numba`` -- JIT-compiled loops from `_kernels_nb` (default when numba
  imports cleanly),
* ``numpy`` -- vectorized fallbacks from `_kernels_np`.

Selection is made once at import time from the ``DEFOCUS_NUMBA``
environment variable: ``0``/``false``/``off`` forces the numpy path,
``1`` requires numba (import errors propagate), anything else means
"use numba if available". `benchmarks/bench_kernels.py` compares the two.

Window sums are bit-identical across backends; convolutions agree to a
few ulp (BLAS vs sequential accumulation).
"""

import os

from . import _kernels_np

_FORCE = os.environ.get("DEFOCUS_NUMBA", "").strip().lower()

if _FORCE in ("0", "false", "off", "no"):
    _impl = _kernels_np
    BACKEND = "numpy"
else:
    try:
        from . import _kernels_nb as _impl

        BACKEND = "numba"
    except ImportError:
        if _FORCE in ("1", "true", "on", "yes"):
            raise
        _impl = _kernels_np
        BACKEND = "numpy"


def backend() -> str:
    """Name of the active kernel backend, "numba" or "numpy"."""
    return BACKEND


def set_threads(n: int) -> None:
    """Cap internal parallelism. No-op on the numpy backend.

    Results are independent of the thread count: all parallel loops
    write disjoint rows/columns.
    """
    if n < 1:
        raise ValueError("thread count must be >= 1")
    if BACKEND == "numba":
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


convolve_axis0 = _impl.convolve_axis0
convolve_axis1 = _impl.convolve_axis1
window_sum = _impl.window_sum
box_sum = _impl.box_sum
laplacian4 = _impl.laplacian4
window_entropy = _impl.window_entropy
