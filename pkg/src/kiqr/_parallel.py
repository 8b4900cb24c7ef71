"""Thread-pool helper honoring the KIQR_THREADS cap.

Fits release the GIL inside the compiled kernel, so threads give real
parallelism.  Results are always assembled in submission order, making output
independent of the worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count():
    """Worker count: KIQR_THREADS caps it, 0 or unset means auto."""
    raw = os.environ.get("KIQR_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"KIQR_THREADS must be an integer, got {raw!r}") from None
    if cap < 0:
        raise ValueError(f"KIQR_THREADS must be nonnegative, got {cap}")
    auto = os.cpu_count() or 1
    return auto if cap == 0 else min(cap, auto)


def parallel_map(fn, items):
    """Map fn over items, in order, with at most thread_count() workers."""
    items = list(items)
    workers = min(thread_count(), max(len(items), 1))
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
