"""Ranking metrics: AUROC, AUPR (average precision) and top decile lift."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from fraudnet.errors import SingleClass


def _check(scores, y, both_classes=True):
    s = np.asarray(scores, dtype=np.float64).ravel()
    t = np.asarray(y).ravel()
    if s.shape != t.shape:
        raise ValueError(f"scores and labels differ in length ({s.size} vs {t.size})")
    if s.size == 0:
        raise SingleClass("no observations")
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("labels must be 0/1")
    t = t.astype(np.int8)
    n_pos = int(t.sum())
    if n_pos == 0 or (both_classes and n_pos == t.size):
        raise SingleClass("both classes must be present" if both_classes else "no positives")
    return s, t


def auroc(scores, y) -> float:
    """Mann-Whitney statistic; tied positive/negative pairs count one half."""
    s, t = _check(scores, y)
    ranks = rankdata(s)  # average ranks for ties
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    u = ranks[t == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _threshold_counts(s, t):
    """Cumulative (tp, fp) at each distinct score, highest score first."""
    order = np.argsort(-s, kind="stable")
    s, t = s[order], t[order]
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tp = np.cumsum(t)[last]
    fp = (last + 1) - tp
    return tp.astype(np.float64), fp.astype(np.float64)


def roc_curve(scores, y) -> tuple[np.ndarray, np.ndarray]:
    """(fpr, tpr) starting at (0, 0); ties form a single diagonal step."""
    s, t = _check(scores, y)
    tp, fp = _threshold_counts(s, t)
    return np.r_[0.0, fp / fp[-1]], np.r_[0.0, tp / tp[-1]]


def pr_curve(scores, y) -> tuple[np.ndarray, np.ndarray]:
    """(recall, precision) at each distinct threshold, highest first."""
    s, t = _check(scores, y)
    tp, fp = _threshold_counts(s, t)
    return tp / tp[-1], tp / (tp + fp)


def aupr(scores, y) -> float:
    """Area under the precision-recall step curve: sum of precision times recall gain."""
    recall, precision = pr_curve(scores, y)
    gain = np.diff(np.r_[0.0, recall])
    return float(np.sum(gain * precision))


def tdl(scores, y, decile: float = 0.10) -> float:
    """Fraud rate among the top ``ceil(decile * n)`` scores over the overall rate.

    Equal scores keep their input order, so tie handling is deterministic.
    """
    s, t = _check(scores, y, both_classes=False)
    n = s.size
    cut = math.ceil(decile * n)
    top = np.argsort(-s, kind="stable")[:cut]
    return float((t[top].sum() / cut) / (t.sum() / n))


@dataclass
class MetricsReport:
    auroc: float
    aupr: float
    tdl: float
    roc: tuple = ()
    pr: tuple = ()

    def as_row(self) -> dict:
        return {"auroc": self.auroc, "aupr": self.aupr, "tdl": self.tdl}


def evaluate(scores, y, decile: float = 0.10, curves: bool = False) -> MetricsReport:
    return MetricsReport(
        auroc(scores, y),
        aupr(scores, y),
        tdl(scores, y, decile),
        roc_curve(scores, y) if curves else (),
        pr_curve(scores, y) if curves else (),
    )
