"""Deterministic fan-out of sample ranges over a process pool.

Samples are split into fixed-size chunks that do not depend on the number of
workers, each chunk derives its own seeds from the sample index, and results
come back in chunk order.  Output is therefore identical for any worker
count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

CHUNK = 250


def chunks(total: int, size: int = CHUNK) -> list[tuple[int, int]]:
    return [(a, min(a + size, total)) for a in range(0, total, size)]


def default_workers() -> int:
    return os.cpu_count() or 1


def map_chunks(fn, total: int, args: tuple = (), workers: int = 1, size: int = CHUNK) -> list:
    """``[fn(start, stop, *args) for each chunk]``, possibly in parallel."""
    parts = chunks(total, size)
    if workers <= 1 or len(parts) <= 1:
        return [fn(a, b, *args) for a, b in parts]
    with ProcessPoolExecutor(max_workers=min(workers, len(parts))) as pool:
        futs = [pool.submit(fn, a, b, *args) for a, b in parts]
        return [f.result() for f in futs]
