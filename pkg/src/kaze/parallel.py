"""Data-parallel runtime shared by all pipeline stages.

Work is split into contiguous index bands and dispatched to a thread pool.
The numba kernels driven from here are compiled with ``nogil=True`` so the
bands really run concurrently. Each band writes a disjoint slice of its
output, so results do not depend on the number of threads.
"""

from __future__ import annotations

import contextlib
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator

_lock = threading.Lock()
_num_threads = 1
_pool: ThreadPoolExecutor | None = None


def get_num_threads() -> int:
    return _num_threads


def set_num_threads(n: int) -> None:
    global _num_threads, _pool
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    with _lock:
        if n != _num_threads and _pool is not None:
            _pool.shutdown(wait=True)
            _pool = None
        _num_threads = n


@contextlib.contextmanager
def num_threads(n: int) -> Iterator[None]:
    """Temporarily run pipeline stages with ``n`` worker threads."""
    previous = get_num_threads()
    set_num_threads(n)
    try:
        yield
    finally:
        set_num_threads(previous)


def _executor() -> ThreadPoolExecutor:
    global _pool
    with _lock:
        if _pool is None:
            _pool = ThreadPoolExecutor(max_workers=_num_threads, thread_name_prefix="kaze")
        return _pool


def bands(total: int, parts: int) -> list[tuple[int, int]]:
    """Split ``range(total)`` into at most ``parts`` contiguous half-open bands."""
    parts = max(1, min(parts, total))
    edges = [total * k // parts for k in range(parts + 1)]
    return [(edges[k], edges[k + 1]) for k in range(parts) if edges[k] < edges[k + 1]]


def run_banded(kernel: Callable[..., None], total: int, *args) -> None:
    """Call ``kernel(*args, start, stop)`` over bands covering ``range(total)``."""
    if total <= 0:
        return
    n = _num_threads
    if n == 1 or total < 2 * n:
        kernel(*args, 0, total)
        return
    futures = [_executor().submit(kernel, *args, lo, hi) for lo, hi in bands(total, n)]
    for f in futures:
        f.result()


def default_threads() -> int:
    return os.cpu_count() or 1


def run_tasks(fn: Callable[..., None], tasks: list[tuple]) -> None:
    """Call ``fn(*task)`` for every task, concurrently when threads > 1."""
    if _num_threads == 1 or len(tasks) < 2:
        for t in tasks:
            fn(*t)
        return
    futures = [_executor().submit(fn, *t) for t in tasks]
    for f in futures:
        f.result()
