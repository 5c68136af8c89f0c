"""Optional thread-level parallelism for independent cell solves.

LAPACK releases the GIL, so a thread pool speeds up batches of dense solves
on multi-core machines.  The pool size comes from the ``FLOQUET_LAP_THREADS``
environment variable (default 1, i.e. serial).  Results are always returned
in input order, so reductions stay deterministic.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_VAR = "FLOQUET_LAP_THREADS"


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(ENV_VAR, "1")))
    except ValueError:
        return 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
