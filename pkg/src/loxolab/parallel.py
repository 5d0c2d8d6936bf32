"""Seeded block decomposition of Monte Carlo work.

Trials are cut into fixed-size blocks and block ``b`` always draws from a
Philox stream keyed by ``(seed, b)``.  Results therefore do not depend on
how many workers process the blocks.
"""

from concurrent.futures import ProcessPoolExecutor

import numpy as np

BLOCK = 4096


def block_rng(seed, block, stream=0):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def trial_blocks(trials, block=BLOCK):
    """``(index, start, count)`` for each block of ``trials``."""
    return [(b, start, min(block, trials - start))
            for b, start in enumerate(range(0, trials, block))]


def map_ordered(func, items, workers=1):
    """``list(map(func, items))``, optionally on a process pool.

    ``func`` must be picklable when ``workers > 1``.
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
