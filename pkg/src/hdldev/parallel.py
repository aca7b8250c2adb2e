"""Replica-level parallelism with deterministic aggregation order."""
from concurrent.futures import ThreadPoolExecutor


def map_replicas(fn, replicas: int, threads: int = 1):
    """[fn(0), ..., fn(replicas - 1)] evaluated on a thread pool.

    The compiled event loop releases the GIL, so threads run replicas
    concurrently; results come back sorted by replica id whatever the schedule.
    """
    if threads <= 1 or replicas <= 1:
        return [fn(r) for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(replicas)))
