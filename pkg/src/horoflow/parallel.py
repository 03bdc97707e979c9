"""Deterministic chunked evaluation with an environment-controlled width.

HOROFLOW_THREADS caps the data-parallel width of the sampling oracles
(0 or unset means auto).  Work is always split into fixed-size chunks and
reassembled in index order, so results are bitwise identical no matter how
many workers actually ran.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "HOROFLOW_THREADS"
CHUNK_ROWS = 8192


def thread_cap() -> int:
    """Return the data-parallel width requested via the environment."""
    raw = os.environ.get(THREADS_ENV_VAR, "").strip()
    if not raw:
        return _auto_width()
    try:
        value = int(raw)
    except ValueError:
        logger.warning("ignoring non-integer %s=%r", THREADS_ENV_VAR, raw)
        return _auto_width()
    if value < 0:
        logger.warning("ignoring negative %s=%d", THREADS_ENV_VAR, value)
        return _auto_width()
    if value == 0:
        return _auto_width()
    return value


def _auto_width() -> int:
    return min(os.cpu_count() or 1, 8)


def map_rows(fn, array: np.ndarray, chunk_rows: int = CHUNK_ROWS) -> np.ndarray:
    """Apply fn to row blocks of array and concatenate results in order.

    fn must be a pure function of its block.  The chunk size is fixed, not
    derived from the worker count, so the split is reproducible.
    """
    n_rows = array.shape[0]
    if n_rows == 0:
        return fn(array)
    blocks = [array[i : i + chunk_rows] for i in range(0, n_rows, chunk_rows)]
    width = thread_cap()
    if width <= 1 or len(blocks) == 1:
        parts = [fn(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=width) as pool:
            parts = list(pool.map(fn, blocks))
    return np.concatenate(parts, axis=0)
