"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``QDD_NUMBA`` is not set to ``0``. Both paths expose the same
functions and agree to rounding error; ``benchmarks/bench_kernels.py``
compares their speed.
"""

import os

from . import _numpy as numpy_backend

numba_backend = None
if os.environ.get("QDD_NUMBA", "1") != "0":
    try:
        from . import _numba as numba_backend
    except ImportError:  # pragma: no cover - numba missing
        numba_backend = None

_active = numba_backend if numba_backend is not None else numpy_backend
BACKEND = "numba" if numba_backend is not None else "numpy"

solve_tridiagonal = _active.solve_tridiagonal
tridiag_matvec = _active.tridiag_matvec
bohm_system = _active.bohm_system
step_system = _active.step_system
classical_system = _active.classical_system

__all__ = [
    "BACKEND",
    "numpy_backend",
    "numba_backend",
    "solve_tridiagonal",
    "tridiag_matvec",
    "bohm_system",
    "step_system",
    "classical_system",
]
