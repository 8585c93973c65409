"""Seeded random streams and the worker-pool helper.

Every random draw is keyed by (master seed, purpose tag, index), so results
do not depend on how work is scheduled across threads.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

GLP, GEP, SPU, NBS, SIM = 1, 2, 3, 4, 5


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


def derive_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=tuple(key)).generate_state(1, np.uint64)[0])


def worker_count() -> int:
    """Workers allowed by NETOBJ_THREADS (0 or unset means one per CPU)."""
    raw = os.environ.get("NETOBJ_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


def parallel_map(fn, items):
    """Ordered map; threads only when more than one worker is allowed."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
