"""Stratified train/test split and stratified folds."""

from __future__ import annotations

import numpy as np

from fraudnet.errors import DegenerateClass, DegenerateFold


def _class_counts(y):
    y = np.asarray(y).astype(np.int8).ravel()
    return y, [np.flatnonzero(y == k) for k in (0, 1)]


def stratified_split_indices(y, test_fraction: float = 0.30, seed: int = 0):
    """Row indices ``(train, test)``, both sorted.

    Each class contributes ``floor(test_fraction * n_class + 1/2)`` rows to the
    test side, clipped so that both sides keep at least one member.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    y, members = _class_counts(y)
    rng = np.random.default_rng(seed)
    test = []
    for k, idx in enumerate(members):
        if idx.size < 2:
            raise DegenerateClass(f"class {k} has {idx.size} member(s); need at least 2")
        n_test = int(np.floor(test_fraction * idx.size + 0.5))
        n_test = min(max(n_test, 1), idx.size - 1)
        test.append(rng.permutation(idx)[:n_test])
    test = np.sort(np.concatenate(test))
    train = np.setdiff1d(np.arange(y.size), test, assume_unique=True)
    return train, test


def stratified_split(ds, test_fraction: float = 0.30, seed: int = 0):
    train, test = stratified_split_indices(ds.target, test_fraction, seed)
    return ds.take(train), ds.take(test)


def stratified_folds(y, n_folds: int = 10, seed: int = 0) -> list[np.ndarray]:
    """Test-row indices for each of ``n_folds`` folds.

    Each class is shuffled and dealt round-robin, so fold sizes per class
    differ by at most one.  Every fold must receive both classes.
    """
    y, members = _class_counts(y)
    if n_folds < 2:
        raise ValueError("need at least two folds")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(n_folds)]
    offset = 0
    for k, idx in enumerate(members):
        if idx.size < n_folds:
            raise DegenerateFold(f"class {k} has {idx.size} rows, fewer than {n_folds} folds")
        for pos, row in enumerate(rng.permutation(idx)):
            folds[(pos + offset) % n_folds].append(row)
        offset += idx.size
    return [np.sort(np.asarray(f)) for f in folds]
