"""Per-claim network features: score statistics and neighborhood label counts.

Quartiles use linear interpolation between order statistics at position
``1 + p (n - 1)`` (numpy's ``"linear"`` method).  Statistics over an empty
neighborhood are 0.
"""

from __future__ import annotations

import logging
from dataclasses import astuple, dataclass
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from fraudnet.birank import ScoreSet
from fraudnet.errors import UnknownNode
from fraudnet.graph import BipartiteGraph, NodeId, NodeKind
from fraudnet.labels import ClaimLabel, label_array

logger = logging.getLogger(__name__)

SCORE_FEATURES = ["scores0", "n1.q1", "n1.med", "n1.max", "n2.q1", "n2.med", "n2.max"]
NEIGHBORHOOD_FEATURES = ["n1.size", "n2.size", "n2.ratioFraud", "n2.ratioNonFraud", "n2.binFraud"]
FEATURE_COLUMNS = ["claim_id"] + SCORE_FEATURES + NEIGHBORHOOD_FEATURES
COLUMN_GROUPS = {**{c: "score" for c in SCORE_FEATURES}, **{c: "nbh" for c in NEIGHBORHOOD_FEATURES}}

QUANTILE_METHOD = "linear"


@dataclass(frozen=True)
class ScoreFeatures:
    scores0: float
    n1_q1: float
    n1_med: float
    n1_max: float
    n2_q1: float
    n2_med: float
    n2_max: float


@dataclass(frozen=True)
class NeighborhoodFeatures:
    n1_size: int
    n2_size: int
    n2_ratio_fraud: float
    n2_ratio_nonfraud: float
    n2_bin_fraud: int


def _summary(values: np.ndarray) -> tuple[float, float, float]:
    if values.size == 0:
        return 0.0, 0.0, 0.0
    q1, med = np.quantile(values, [0.25, 0.5], method=QUANTILE_METHOD)
    return float(q1), float(med), float(values.max())


def _claim(g: BipartiteGraph, claim) -> int:
    if isinstance(claim, str):
        return g.claim(claim).index
    if not isinstance(claim, NodeId) or claim.kind is not NodeKind.CLAIM:
        raise UnknownNode(f"not a claim node: {claim!r}")
    if not 0 <= claim.index < g.n_claims:
        raise UnknownNode(f"claim {claim!r} out of range")
    return claim.index


def _first_two_shells(g: BipartiteGraph, i: int) -> tuple[np.ndarray, np.ndarray]:
    w, wt = g.weights, g.weights_t
    n1 = w.indices[w.indptr[i]:w.indptr[i + 1]]
    if n1.size == 1:
        j = n1[0]
        reach = wt.indices[wt.indptr[j]:wt.indptr[j + 1]]
    else:
        reach = np.unique(np.concatenate([wt.indices[wt.indptr[j]:wt.indptr[j + 1]] for j in n1]))
    n2 = reach[reach != i]
    return n1, n2


def score_features(g: BipartiteGraph, scores: ScoreSet, claim) -> ScoreFeatures:
    i = _claim(g, claim)
    if not scores.converged:
        logger.warning("score features computed from non-converged scores")
    n1, n2 = _first_two_shells(g, i)
    return ScoreFeatures(
        float(scores.claim_scores[i]),
        *_summary(scores.party_scores[n1]),
        *_summary(scores.claim_scores[n2]),
    )


def _neighborhood_features(n1, n2, codes) -> NeighborhoodFeatures:
    n_fraud = int(np.count_nonzero(codes[n2] == ClaimLabel.FRAUD))
    n_non = int(np.count_nonzero(codes[n2] == ClaimLabel.NON_FRAUD))
    size = int(n2.size)
    return NeighborhoodFeatures(
        int(n1.size),
        size,
        n_fraud / size if size else 0.0,
        n_non / size if size else 0.0,
        int(n_fraud > 0),
    )


def neighborhood_features(g: BipartiteGraph, labels, claim) -> NeighborhoodFeatures:
    """Sizes of the first two shells and label ratios in the second.

    ``labels`` is either a mapping of claim id to :class:`ClaimLabel` or a
    label-code array from :func:`fraudnet.labels.label_array`.  Ratios divide
    by the full second-order size, unknown claims included.
    """
    codes = labels if isinstance(labels, np.ndarray) else label_array(g, labels)
    i = _claim(g, claim)
    n1, n2 = _first_two_shells(g, i)
    return _neighborhood_features(n1, n2, codes)


def featurize_claims(g: BipartiteGraph, scores: ScoreSet,
                     labels: Mapping[str, ClaimLabel] | np.ndarray,
                     targets: Iterable) -> pd.DataFrame:
    """One row per target claim, ordered by claim index.

    Columns follow :data:`FEATURE_COLUMNS`; ``claim_id`` joins to intrinsic
    features.
    """
    codes = labels if isinstance(labels, np.ndarray) else label_array(g, labels)
    idx = sorted({_claim(g, t) for t in targets})
    if not scores.converged:
        logger.warning("featurizing with non-converged scores")
    rows = []
    for i in idx:
        n1, n2 = _first_two_shells(g, i)
        sf = ScoreFeatures(
            float(scores.claim_scores[i]),
            *_summary(scores.party_scores[n1]),
            *_summary(scores.claim_scores[n2]),
        )
        nf = _neighborhood_features(n1, n2, codes)
        rows.append((g.claim_ids[i],) + astuple(sf) + astuple(nf))
    frame = pd.DataFrame.from_records(rows, columns=FEATURE_COLUMNS)
    if frame.empty:
        frame = frame.astype({c: "float64" for c in SCORE_FEATURES + ["n2.ratioFraud", "n2.ratioNonFraud"]})
    int_cols = ["n1.size", "n2.size", "n2.binFraud"]
    frame[int_cols] = frame[int_cols].astype("int64")
    frame["claim_id"] = frame["claim_id"].astype(object)
    return frame


def write_features_csv(frame: pd.DataFrame, path) -> None:
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def read_features_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, dtype={"claim_id": str}, keep_default_na=False)
