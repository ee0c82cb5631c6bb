"""Row-chunked thread parallelism with schedule-independent results.

Chunk boundaries depend only on the row count, never on the thread count, and
partial results are combined in chunk order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")

CHUNK_ROWS = 256
_threads = os.cpu_count() or 1


def set_threads(n: int | None) -> None:
    global _threads
    _threads = max(1, int(n)) if n else (os.cpu_count() or 1)


def get_threads() -> int:
    return _threads


def row_chunks(n: int) -> list[slice]:
    return [slice(a, min(a + CHUNK_ROWS, n)) for a in range(0, n, CHUNK_ROWS)] or [slice(0, 0)]


def map_rows(fn: Callable[[slice], T], n: int) -> list[T]:
    """Apply ``fn`` to each fixed row chunk; results come back in chunk order."""
    chunks = row_chunks(n)
    if _threads <= 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=min(_threads, len(chunks))) as pool:
        return list(pool.map(fn, chunks))
