"""Numba / pure-numpy backend selection.

The hot numeric kernels in ``se3kit._kernels`` are written in nopython-
compatible numpy and compiled with ``numba.njit`` at import time unless the
environment variable ``SE3KIT_NUMBA`` is set to ``0`` (or numba is not
importable), in which case the plain-Python versions run as-is.  Both paths
execute the same source, so results agree to the last ulp or near it; the
benchmark in ``benchmarks/bench_backends.py`` compares their speed.

``SE3KIT_THREADS`` caps numba's threading layer (the kernels are currently
single-threaded, but the cap is honored so future parallel sweeps stay
bounded).
"""

from __future__ import annotations

import os


def _env_flag(name: str, default: str) -> str:
    value = os.environ.get(name, default).strip().lower()
    return value


def numba_requested() -> bool:
    return _env_flag("SE3KIT_NUMBA", "1") not in ("0", "false", "off", "no")


_numba = None
if numba_requested():
    try:
        import numba as _numba
    except ImportError:  # fall back silently; BACKEND reports the truth
        _numba = None

BACKEND = "numba" if _numba is not None else "numpy"

if _numba is not None:
    threads = os.environ.get("SE3KIT_THREADS")
    if threads:
        try:
            _numba.set_num_threads(max(1, min(int(threads), _numba.config.NUMBA_NUM_THREADS)))
        except (ValueError, RuntimeError):
            pass


def jit(func):
    """Compile ``func`` with njit when the numba backend is active."""
    if _numba is None:
        return func
    return _numba.njit(cache=True)(func)
