"""SMOTE oversampling combined with random majority undersampling.

The resampling pair is fixed by ``majority_keep``: the majority class is first
cut to ``round(majority_keep * M)`` rows, then the minority is topped up with
synthetic rows until it makes up ``target_ratio`` of the result.  If the
minority is already large enough for that, no synthetics are made and the
majority is cut further instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from fraudnet.errors import DegenerateClass, TooFewMinority

logger = logging.getLogger(__name__)


@dataclass
class SmoteResult:
    X: np.ndarray
    y: np.ndarray
    kept_majority: np.ndarray  # indices into the input rows
    minority: np.ndarray       # indices into the input rows
    base: np.ndarray           # per synthetic row: input index of the seed point
    neighbor: np.ndarray       # per synthetic row: input index of the chosen neighbour
    gap: np.ndarray            # per synthetic row: interpolation weight u
    minority_label: int
    n_majority_in: int

    @property
    def n_synthetic(self) -> int:
        return self.base.size

    @property
    def oversample_factor(self) -> float:
        return (self.minority.size + self.n_synthetic) / self.minority.size

    @property
    def undersample_factor(self) -> float:
        return self.kept_majority.size / self.n_majority_in

    @property
    def minority_ratio(self) -> float:
        return float(np.mean(self.y == self.minority_label))


def resample_counts(n_minority: int, n_majority: int, target_ratio: float,
                    majority_keep: float) -> tuple[int, int]:
    """Final ``(minority, majority)`` row counts."""
    r = target_ratio
    keep = int(round(majority_keep * n_majority))
    want = int(round(r * keep / (1.0 - r)))
    if want >= n_minority:
        return want, keep
    keep = min(n_majority, int(round(n_minority * (1.0 - r) / r)))
    return n_minority, keep


def smote(X, y, target_ratio: float = 0.15, k: int = 5, majority_keep: float = 0.5,
          seed=0, gap: float | None = None) -> SmoteResult:
    """Rebalance ``(X, y)`` so the minority class makes up ``target_ratio``.

    Synthetic rows are ``x + u (x_nn - x)`` where ``x_nn`` is one of the ``k``
    nearest minority neighbours of ``x`` (Euclidean distance on z-scored
    columns) and ``u ~ U[0, 1)``.  Passing ``gap`` fixes ``u``.  Every minority
    row seeds either ``floor(n_syn / m)`` or one more synthetic row.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int8).ravel()
    if not 0.0 < target_ratio < 1.0:
        raise ValueError("target_ratio must lie in (0, 1)")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClass("SMOTE needs both classes")
    minority_label = 1 if n_pos <= n_neg else 0
    minority = np.flatnonzero(y == minority_label)
    majority = np.flatnonzero(y != minority_label)
    m = minority.size
    if m < k + 1:
        raise TooFewMinority(f"{m} minority rows, need at least k + 1 = {k + 1}")
    rng = np.random.default_rng(seed)

    m_final, keep = resample_counts(m, majority.size, target_ratio, majority_keep)
    if m / (m + majority.size) >= target_ratio:
        logger.warning("minority ratio %.4f already at or above target %.4f",
                       m / (m + majority.size), target_ratio)
    n_syn = m_final - m

    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    z = (X[minority] - X.mean(axis=0)) / scale
    _, nn = cKDTree(z).query(z, k=k + 1)
    nn = np.atleast_2d(nn)
    # drop each point itself; exact duplicates may push it out of column 0
    neighbours = np.empty((m, k), dtype=np.int64)
    for i in range(m):
        row = nn[i][nn[i] != i]
        neighbours[i] = row[:k]

    per_point = np.full(m, n_syn // m)
    extra = rng.choice(m, size=n_syn % m, replace=False)
    per_point[extra] += 1
    base_local = np.repeat(np.arange(m), per_point)
    pick = rng.integers(0, k, size=n_syn)
    nb_local = neighbours[base_local, pick]
    u = np.full(n_syn, float(gap)) if gap is not None else rng.random(n_syn)
    synthetic = X[minority[base_local]] + u[:, None] * (X[minority[nb_local]] - X[minority[base_local]])

    kept = np.sort(rng.choice(majority, size=keep, replace=False))
    X_out = np.vstack([X[kept], X[minority], synthetic])
    y_out = np.concatenate([
        np.full(kept.size, 1 - minority_label, dtype=np.int8),
        np.full(m + n_syn, minority_label, dtype=np.int8),
    ])
    return SmoteResult(X_out, y_out, kept, minority, minority[base_local], minority[nb_local], u,
                       minority_label, majority.size)
