"""Worker-pool helper. ``RESILIENCE_THREADS`` caps the worker count."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    cap = os.environ.get("RESILIENCE_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"RESILIENCE_THREADS must be an integer, got {cap!r}") from None
    return n


def parallel_map(fn, items):
    """Order-preserving map; numpy releases the GIL in the heavy kernels."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
