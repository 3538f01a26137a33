"""Order-preserving parallel map, capped by ``MOSGROUP_THREADS`` (0 = auto)."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_MIN_ITEMS = 4


def thread_count() -> int:
    raw = os.environ.get("MOSGROUP_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = min(8, os.cpu_count() or 1)
    return n


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """``[fn(x) for x in items]``, possibly evaluated concurrently.

    Results are returned in input order, so callers stay deterministic.
    """
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) < _MIN_ITEMS:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
