"""Thread-pool helper honouring ``GRIDLAB_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    raw = os.environ.get("GRIDLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def pmap(func, items) -> list:
    """Map ``func`` over ``items`` keeping input order in the result."""
    items = list(items)
    threads = min(thread_count(), len(items))
    if threads <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
