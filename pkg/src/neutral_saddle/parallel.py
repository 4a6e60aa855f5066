"""Order-preserving map over a process pool."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable


def parallel_map(fn: Callable, items: Iterable, threads: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally spread over ``threads`` processes.

    Results come back in input order, so reductions stay deterministic.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
