"""Input checks shared by the estimator and the CLI."""

from __future__ import annotations

import numpy as np

from .graph import UnifiedGraph
from .ingest import Dataset


def check_pairs(X, num_users: int, num_items: int) -> np.ndarray:
    """Coerce ``X`` to an ``(n, 2)`` int array of in-range (user, item) indices."""
    arr = np.asarray(X)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) array of (user, item) pairs, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValueError("pair indices must be integers")
    arr = arr.astype(np.int64)
    if arr.size:
        if arr[:, 0].min() < 0 or arr[:, 0].max() >= num_users:
            raise ValueError(f"user index out of range [0, {num_users})")
        if arr[:, 1].min() < 0 or arr[:, 1].max() >= num_items:
            raise ValueError(f"item index out of range [0, {num_items})")
    return arr


def check_dataset_graph(dataset: Dataset, graph: UnifiedGraph):
    if (dataset.num_users, dataset.num_items) != (graph.num_users, graph.num_items):
        raise ValueError(
            f"dataset has {dataset.num_users} users / {dataset.num_items} items, "
            f"graph has {graph.num_users} / {graph.num_items}"
        )
    if not dataset.train_positives:
        raise ValueError("dataset has no training positives")
