"""Deterministic work splitting over threads.

Work is cut into index ranges whose results land in disjoint output slots, so
the thread count never changes a result.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable


def resolve_threads(threads: int | None) -> int:
    if threads is None or threads == 0:
        return os.cpu_count() or 1
    if threads < 0:
        raise ValueError("threads must be >= 0")
    return int(threads)


def ranges(n_items: int, n_parts: int) -> list[tuple[int, int]]:
    n_parts = max(1, min(n_parts, n_items))
    edges = [n_items * k // n_parts for k in range(n_parts + 1)]
    return [(edges[k], edges[k + 1]) for k in range(n_parts) if edges[k] < edges[k + 1]]


def run_ranges(fn: Callable[[int, int], None], n_items: int, threads: int | None,
               parts_per_thread: int = 1) -> None:
    """Call ``fn(lo, hi)`` over a partition of ``range(n_items)``."""
    threads = resolve_threads(threads)
    if threads == 1 or n_items <= 1:
        fn(0, n_items)
        return
    parts = ranges(n_items, threads * parts_per_thread)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for fut in [pool.submit(fn, lo, hi) for lo, hi in parts]:
            fut.result()


def map_ordered(fn: Callable[[int], object], n_items: int, threads: int | None) -> list:
    """``[fn(i) for i in range(n_items)]`` evaluated on a thread pool."""
    threads = resolve_threads(threads)
    if threads == 1 or n_items <= 1:
        return [fn(i) for i in range(n_items)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_items)))
