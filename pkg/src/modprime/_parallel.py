"""Ordered fan-out over fixed work chunks.

Chunk boundaries never depend on the worker count, and results come back in
submission order, so reductions built on top are bit-identical for any
``threads`` setting.
"""

import os
from concurrent.futures import ThreadPoolExecutor

_default_threads = None


def set_default_threads(n):
    global _default_threads
    _default_threads = None if n is None else max(1, int(n))


def default_threads():
    if _default_threads is not None:
        return _default_threads
    env = os.environ.get("MODPRIME_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def ordered_map(fn, items, threads=None):
    items = list(items)
    n = default_threads() if threads is None else max(1, int(threads))
    if n == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
