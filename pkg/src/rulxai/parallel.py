"""Order-preserving thread pool map, capped by ``RUL_EXPLAIN_THREADS``."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "RUL_EXPLAIN_THREADS"


def thread_count(threads=None) -> int:
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, int(threads))


def ordered_map(fn, items, threads=None) -> list:
    """``[fn(x) for x in items]``, possibly on worker threads.

    All inputs (including seeds) must be fixed before the call; results come
    back in input order, so scheduling never changes the output.
    """
    items = list(items)
    n = min(thread_count(threads), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
