"""Seeded, splittable random streams for replica-parallel Monte Carlo.

Replicas are grouped into fixed-size blocks; each block owns an
independent Philox stream keyed by (seed, stream label, block index)
through SeedSequence spawn keys. The block structure depends only on
the replica count and coordinate width, never on the worker count, so
any scheduling produces byte-identical results and reductions can be
folded in block order.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

DEFAULT_BLOCK_BUDGET = 2 ** 22  # max floats per block of normals


def label_key(label: str) -> int:
    """Stable 64-bit key for a stream label (never Python's salted hash)."""
    return int.from_bytes(hashlib.blake2s(label.encode(), digest_size=8).digest(),
                          "big")


def block_rows_for(n_cols: int, budget: int = DEFAULT_BLOCK_BUDGET) -> int:
    """Rows per block so a block of normals stays within the float budget."""
    return max(256, min(4096, budget // max(1, n_cols)))


def block_generator(seed: int, label: str, block_index: int) -> np.random.Generator:
    """Independent counter-based generator for one replica block."""
    ss = np.random.SeedSequence(entropy=abs(int(seed)),
                                spawn_key=(label_key(label), block_index))
    return np.random.Generator(np.random.Philox(ss))


def block_slices(n_replicas: int, rows: int) -> list[tuple[int, int]]:
    return [(start, min(start + rows, n_replicas))
            for start in range(0, n_replicas, rows)]


def map_normal_blocks(seed: int, label: str, n_replicas: int, n_cols: int,
                      fn: Callable[[int, np.ndarray], object],
                      workers: int = 1,
                      block_rows: int | None = None) -> list:
    """Apply fn(start_row, Z_block) to each block of standard normals.

    Z_block has shape (rows, n_cols). Results come back ordered by block
    index regardless of the worker count.
    """
    rows = block_rows or block_rows_for(n_cols)
    slices = block_slices(n_replicas, rows)

    def job(item):
        idx, (start, stop) = item
        rng = block_generator(seed, label, idx)
        z = rng.standard_normal((stop - start, n_cols))
        return fn(start, z)

    items = list(enumerate(slices))
    if workers <= 1 or len(items) <= 1:
        return [job(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, items))


def ordered_sum(parts: Sequence) -> object:
    """Fold partial results in block order (deterministic reduction)."""
    acc = parts[0]
    for p in parts[1:]:
        acc = acc + p
    return acc
