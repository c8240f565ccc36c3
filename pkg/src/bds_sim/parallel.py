"""Replicate-level parallelism with results independent of the worker count."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")

THREADS_ENV = "BDS_SIM_THREADS"


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run_chunk(fn, indices):
    return [fn(i) for i in indices]


def run_replicates(fn: Callable[[int], T], count: int, threads: int | None = None) -> list[T]:
    """``[fn(0), ..., fn(count - 1)]``, computed on ``threads`` worker processes.

    ``fn`` must be picklable.  Results come back in replicate order, so any
    aggregation over them is the same for every thread count.
    """
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or count < 2:
        return [fn(i) for i in range(count)]
    size = -(-count // (threads * 4))
    chunks = [range(s, min(s + size, count)) for s in range(0, count, size)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(_run_chunk, [fn] * len(chunks), chunks)
        return [r for part in parts for r in part]
