"""Kernel backend selection.

All hot numeric kernels in :mod:`nahmkn.kernels` are written against the
numpy subset that numba supports in nopython mode.  By default they are
JIT-compiled; setting the environment variable ``NAHMKN_PURE_NUMPY=1``
(before import) selects the interpreted pure-numpy path instead.  Both
paths execute the same source, in the same operation order, so results
agree bit-for-bit up to LAPACK reproducibility.

The pure path is mainly for debugging and for benchmarking the JIT
speedup (see ``benchmarks/bench_backends.py``); it is 1-2 orders of
magnitude slower on the ODE sweeps.
"""

import os


def _pure_requested() -> bool:
    val = os.environ.get("NAHMKN_PURE_NUMPY", "")
    return val.strip() not in ("", "0", "false", "False")


if _pure_requested():
    _HAVE_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a hard dependency
        _HAVE_NUMBA = False

USING_NUMBA = _HAVE_NUMBA


def jit(fn):
    """Compile ``fn`` with numba, or return it unchanged in pure mode."""
    if USING_NUMBA:
        import numba

        return numba.njit(cache=True, fastmath=False)(fn)
    return fn


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
