"""Thread-pool helper honoring the OMNIKIT_THREADS cap.

Work items carry their own seeds, so parallel execution returns exactly the
sequential result (in input order).
"""

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count(requested=None):
    cap = os.environ.get("OMNIKIT_THREADS")
    if cap is not None:
        try:
            cap = max(1, int(cap))
        except ValueError:
            cap = None
    available = os.cpu_count() or 1
    count = requested if requested is not None else available
    if cap is not None:
        count = min(count, cap)
    return max(1, min(count, available))


def parallel_map(fn, items, workers=None):
    """Map ``fn`` over ``items`` preserving order; sequential when 1 worker."""
    items = list(items)
    workers = worker_count(workers)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
