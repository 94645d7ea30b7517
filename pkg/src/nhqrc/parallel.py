"""Ordered process-pool map used by the ensemble experiments."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "NHQRC_WORKERS"


def available_cpus() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def worker_count(workers: int | None = None) -> int:
    """Explicit value, else ``$NHQRC_WORKERS``, else the number of usable CPUs."""
    if workers is None:
        raw = os.environ.get(WORKERS_ENV, str(available_cpus()))
        try:
            workers = int(raw)
        except ValueError as exc:
            raise ValueError(f"{WORKERS_ENV}={raw!r} is not an integer") from exc
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return workers


def ordered_map(fn, items, workers: int | None = None) -> list:
    """``[fn(x) for x in items]``, optionally spread over processes.

    Results come back in input order, so outputs do not depend on the
    worker count.
    """
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
