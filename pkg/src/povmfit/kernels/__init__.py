"""Backend selection for the hot numeric kernels.

The environment variable ``POVMFIT_BACKEND`` picks the implementation:

* ``auto`` (default) - numba-compiled kernels when numba imports, else numpy
* ``numba`` - require the numba kernels, fail loudly if unavailable
* ``numpy`` - force the pure-numpy fallback

``benchmarks/backend_bench.py`` compares the two on the shipped scenarios.
"""

import os

from . import numpy_backend

MSE = numpy_backend.MSE
MLE = numpy_backend.MLE

_requested = os.environ.get("POVMFIT_BACKEND", "auto").strip().lower()
if _requested not in {"auto", "numba", "numpy"}:
    raise ValueError(
        f"POVMFIT_BACKEND must be one of auto/numba/numpy, got {_requested!r}"
    )

if _requested == "numpy":
    _impl = numpy_backend
    BACKEND = "numpy"
else:
    try:
        from . import numba_backend as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _impl = numpy_backend
        BACKEND = "numpy"

loss_and_grad = _impl.loss_and_grad
born_matrix = _impl.born_matrix


def backend_name() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return BACKEND
