"""Worker-count control shared by the parallel code paths.

The effective worker count is ``min(requested, MORPHIELD_THREADS, cpu_count)``.
The env var is a hard cap so operators can pin the process to a core budget.
"""

from __future__ import annotations

import os

_ENV_VAR = "MORPHIELD_THREADS"


def worker_count(requested: int | None = None) -> int:
    """Resolve the number of workers to use for a parallel section."""
    avail = os.cpu_count() or 1
    cap = os.environ.get(_ENV_VAR)
    if cap is not None:
        try:
            avail = min(avail, max(1, int(cap)))
        except ValueError:
            pass
    if requested is None:
        return avail
    return max(1, min(requested, avail))


def configure_numba_threads(workers: int) -> int:
    """Clamp numba's thread pool to ``workers``; returns the value applied."""
    import numba

    applied = max(1, min(workers, numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(applied)
    return applied
