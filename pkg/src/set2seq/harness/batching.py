"""Minibatch assembly: shuffling, cardinality bucketing, zero padding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datagen.io import Instance
from ..numerics.rng import SeededRng


@dataclass
class TrainBatch:
    elements: np.ndarray        # (B, n_max, d_raw); padded rows are zeros
    mask: np.ndarray            # (B, n_max) bool, True at real rows
    targets: list[list[int] | None]
    instances: list[Instance]   # originals, for metadata/checkers

    @property
    def size(self) -> int:
        return self.elements.shape[0]


def pad_batch(instances: list[Instance], n_max: int | None = None) -> TrainBatch:
    if not instances:
        raise ValueError("cannot batch zero instances")
    widths = {inst.d_raw for inst in instances}
    if len(widths) != 1:
        raise ValueError(f"inconsistent feature widths in batch: {sorted(widths)}")
    d_raw = widths.pop()
    sizes = [inst.n for inst in instances]
    if n_max is None:
        n_max = max(sizes)
    elif n_max < max(sizes):
        raise ValueError(f"n_max={n_max} smaller than largest instance ({max(sizes)})")
    elements = np.zeros((len(instances), n_max, d_raw), dtype=np.float64)
    mask = np.zeros((len(instances), n_max), dtype=bool)
    for i, inst in enumerate(instances):
        elements[i, :inst.n] = inst.elements
        mask[i, :inst.n] = True
    return TrainBatch(elements=elements, mask=mask,
                      targets=[inst.target for inst in instances],
                      instances=list(instances))


def make_batches(instances: list[Instance], batch_size: int,
                 rng: SeededRng | None = None) -> list[TrainBatch]:
    """Split into padded batches of near-equal cardinality.

    With an rng: shuffle, stable-sort by cardinality (so equal-n instances
    stay shuffled within buckets), chunk, then shuffle the chunk order.
    Without: deterministic size-sorted chunks in input order.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    idx = np.arange(len(instances))
    if rng is not None:
        rng.shuffle(idx)
    idx = idx[np.argsort([instances[i].n for i in idx], kind="stable")]
    chunks = [idx[i:i + batch_size] for i in range(0, len(idx), batch_size)]
    if rng is not None and len(chunks) > 1:
        order = np.arange(len(chunks))
        rng.shuffle(order)
        chunks = [chunks[i] for i in order]
    return [pad_batch([instances[i] for i in chunk]) for chunk in chunks]
