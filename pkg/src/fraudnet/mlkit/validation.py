"""Cross-validation with in-fold resampling, and permutation importance."""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import pandas as pd

from fraudnet.errors import LeakageError
from fraudnet.mlkit.dataset import LabeledDataset
from fraudnet.mlkit.logistic import fit_logistic
from fraudnet.mlkit.metrics import auroc, evaluate
from fraudnet.mlkit.smote import smote
from fraudnet.mlkit.splits import stratified_folds

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResampleSpec:
    target_ratio: float = 0.15
    k: int = 5
    majority_keep: float = 0.5
    enabled: bool = True


def resample(ds: LabeledDataset, spec: ResampleSpec, seed) -> tuple[LabeledDataset, dict]:
    """SMOTE-rebalance a dataset; returns the new dataset and a summary of the ratio pair."""
    if not spec.enabled:
        return ds, {}
    m = min(ds.n_positive, len(ds) - ds.n_positive)
    k = min(spec.k, m - 1)
    if k < spec.k:
        logger.warning("only %d minority rows; SMOTE uses k=%d", m, k)
    res = smote(ds.matrix(), ds.target, spec.target_ratio, k, spec.majority_keep, seed)
    frame = pd.DataFrame(res.X, columns=ds.feature_names)
    ids = np.concatenate([ds.ids[res.kept_majority], ds.ids[res.minority],
                          np.full(res.n_synthetic, -1, dtype=ds.ids.dtype if ds.ids.dtype.kind in "iu" else object)])
    out = LabeledDataset(frame, res.y, ids, dict(ds.groups))
    info = {
        "oversample_factor": res.oversample_factor,
        "undersample_factor": res.undersample_factor,
        "n_synthetic": res.n_synthetic,
        "minority_ratio": res.minority_ratio,
        "k": k,
    }
    return out, info


def check_disjoint(train_ids, test_ids) -> None:
    """Raise :class:`LeakageError` if any row id sits on both sides of a split."""
    overlap = set(np.asarray(test_ids).tolist()).intersection(np.asarray(train_ids).tolist())
    if overlap:
        raise LeakageError(f"{len(overlap)} row id(s) appear in both train and test")


def row_overlap(train_X, test_X) -> int:
    """Number of test rows whose feature vector also occurs in the training rows."""
    train_rows = {np.asarray(r, dtype=np.float64).tobytes() for r in np.asarray(train_X)}
    return sum(np.asarray(r, dtype=np.float64).tobytes() in train_rows for r in np.asarray(test_X))


@dataclass
class CVResult:
    folds: list
    resampling: list = field(default_factory=list)

    def _stack(self, key):
        return np.array([getattr(f, key) for f in self.folds])

    @property
    def mean(self) -> dict:
        return {k: float(self._stack(k).mean()) for k in ("auroc", "aupr", "tdl")}

    @property
    def std(self) -> dict:
        return {k: float(self._stack(k).std(ddof=1)) if len(self.folds) > 1 else 0.0
                for k in ("auroc", "aupr", "tdl")}

    def rows(self) -> list[dict]:
        return [{"fold": i + 1, **f.as_row()} for i, f in enumerate(self.folds)]


def cross_validate(ds: LabeledDataset, features=None, folds: int = 10, seed: int = 0,
                   resampling: ResampleSpec = ResampleSpec(),
                   fitter: Callable | None = None, threads: int = 1) -> CVResult:
    """Stratified k-fold estimate of AUROC, AUPR and TDL.

    Resampling and standardization happen inside each training fold only.
    Each fold draws from its own child of ``SeedSequence(seed)``, so results do
    not depend on ``threads``.
    """
    feats = ds.feature_names if features is None else list(features)
    fitter = fitter or fit_logistic
    test_sets = stratified_folds(ds.target, folds, seed)
    seeds = np.random.SeedSequence(seed).spawn(folds)

    def run(i):
        test_idx = test_sets[i]
        train_idx = np.setdiff1d(np.arange(len(ds)), test_idx, assume_unique=True)
        train, test = ds.take(train_idx), ds.take(test_idx)
        check_disjoint(train.ids, test.ids)
        train, info = resample(train.select(feats), resampling, seeds[i])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = fitter(train, feats)
        return evaluate(model.predict_proba(test.features), test.target), info

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(folds)))
    else:
        results = [run(i) for i in range(folds)]
    return CVResult([r[0] for r in results], [r[1] for r in results])


class Importance(NamedTuple):
    feature: str
    mean: float
    std: float


def permutation_importance(model, ds: LabeledDataset, metric: Callable = auroc,
                           repeats: int = 5, seed: int = 0) -> list[Importance]:
    """Mean drop in ``metric`` when one column is shuffled, for every dataset column.

    Columns the model does not use score exactly 0.  Sorted by decreasing
    importance, ties broken by name.  Correlated copies of a feature share
    credit, so each looks less important than it would alone.
    """
    base = metric(model.predict_proba(ds.features), ds.target)
    names = ds.feature_names
    streams = np.random.SeedSequence(seed).spawn(len(names))
    out = []
    for name, ss in zip(names, streams):
        if name not in model.features:
            out.append(Importance(name, 0.0, 0.0))
            continue
        rng = np.random.default_rng(ss)
        drops = []
        frame = ds.features.copy()
        original = frame[name].to_numpy()
        for _ in range(repeats):
            frame[name] = rng.permutation(original)
            drops.append(base - metric(model.predict_proba(frame), ds.target))
        out.append(Importance(name, float(np.mean(drops)), float(np.std(drops))))
    out.sort(key=lambda imp: (-imp.mean, imp.feature))
    return out
