"""Feature table plus binary target."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from fraudnet.errors import DataError
from fraudnet.labels import ClaimLabel


def make_targets(labels) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(y_known, y_fraud)`` for a sequence of claim labels.

    ``y_known`` is 1 for investigated claims (fraud or non-fraud); ``y_fraud``
    is 1 for fraud only.
    """
    codes = np.array([int(ClaimLabel.parse(v)) for v in labels], dtype=np.int8)
    y_known = (codes != ClaimLabel.UNKNOWN).astype(np.int8)
    y_fraud = (codes == ClaimLabel.FRAUD).astype(np.int8)
    return y_known, y_fraud


@dataclass
class LabeledDataset:
    """Numeric feature frame, aligned 0/1 target and row ids.

    ``groups`` maps feature name to its group (``intr``, ``score`` or ``nbh``).
    """

    features: pd.DataFrame
    target: np.ndarray
    ids: np.ndarray | None = None
    groups: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = self.features.reset_index(drop=True)
        self.target = np.asarray(self.target).astype(np.int8).ravel()
        if len(self.features) != self.target.size:
            raise DataError("features and target differ in length")
        if not np.all((self.target == 0) | (self.target == 1)):
            raise DataError("target must be 0/1")
        if self.ids is None:
            self.ids = np.arange(self.target.size)
        self.ids = np.asarray(self.ids)
        if self.ids.size != self.target.size:
            raise DataError("ids and target differ in length")
        values = self.features.to_numpy(dtype=np.float64, na_value=np.nan)
        if np.isnan(values).any():
            bad = self.features.columns[np.isnan(values).any(axis=0)].tolist()
            raise DataError(f"missing values in columns {bad}")

    def __len__(self):
        return self.target.size

    @property
    def feature_names(self) -> list[str]:
        return list(self.features.columns)

    @property
    def class_ratio(self) -> float:
        return float(self.target.mean()) if self.target.size else 0.0

    @property
    def n_positive(self) -> int:
        return int(self.target.sum())

    def matrix(self, columns=None) -> np.ndarray:
        cols = self.feature_names if columns is None else list(columns)
        return self.features[cols].to_numpy(dtype=np.float64)

    def take(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows)
        return LabeledDataset(self.features.iloc[rows], self.target[rows], self.ids[rows], dict(self.groups))

    def select(self, columns) -> "LabeledDataset":
        cols = list(columns)
        return LabeledDataset(self.features[cols], self.target, self.ids,
                              {c: self.groups[c] for c in cols if c in self.groups})

    def group_columns(self, group: str) -> list[str]:
        if group == "all":
            return self.feature_names
        return [c for c in self.feature_names if self.groups.get(c) == group]
