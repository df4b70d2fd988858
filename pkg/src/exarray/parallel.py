"""Deterministic fan-out of independent work units over optional threads.

Work is always partitioned into a fixed number of units, each driven by its
own derived stream, and results are reduced in unit order.  The thread count
therefore affects wall-clock time only, never the output: ``threads=4`` and
``threads=1`` are byte-identical by construction.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")


def run_units(worker: Callable[[int], T], units: int, threads: int = 1) -> list[T]:
    """Evaluate ``worker(0), ..., worker(units - 1)``, results in unit order."""
    if units < 1:
        raise ValueError("need at least one work unit")
    if threads <= 1 or units == 1:
        return [worker(u) for u in range(units)]
    with ThreadPoolExecutor(max_workers=min(threads, units)) as pool:
        return list(pool.map(worker, range(units)))


def unit_sizes(total: int, units: int) -> list[int]:
    """Split ``total`` items into ``units`` contiguous parts (sizes fixed by
    the pair, independent of threading)."""
    base, rem = divmod(total, units)
    return [base + (1 if u < rem else 0) for u in range(units)]
