"""Fraud scores via BiRank with a claim-only query vector.

The fixed point solved here is::

    c = alpha * S p + (1 - alpha) * c0
    p = S^T c

with ``S = D_C^{-1/2} W D_P^{-1/2}``.  Parties carry no prior mass.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from fraudnet.errors import (
    ConfigError,
    DataError,
    DimensionMismatch,
    SingularSystem,
    TooLarge,
    UnknownClaimId,
)
from fraudnet.graph import BipartiteGraph
from fraudnet.labels import ClaimLabel

logger = logging.getLogger(__name__)

DIRECT_SOLVE_LIMIT = 5000


class NormalizedOperator:
    """Symmetrically normalized weights ``S_ij = w_ij / sqrt(d_i d_j)``.

    Stored sparse in both orientations; nothing dense is ever built.
    """

    def __init__(self, g: BipartiteGraph):
        dc, dp = g.claim_degrees, g.party_degrees
        if np.any(dc <= 0) or np.any(dp <= 0):
            raise DataError("zero-degree node cannot be normalized")
        w = g.weights.tocoo()
        data = w.data / (np.sqrt(dc[w.row]) * np.sqrt(dp[w.col]))
        self.matrix = sp.csr_matrix((data, (w.row, w.col)), shape=w.shape)
        self.matrix_t = self.matrix.T.tocsr()
        self.shape = w.shape

    def party_to_claim(self, p: np.ndarray) -> np.ndarray:
        """``S p``"""
        return self.matrix @ p

    def claim_to_party(self, c: np.ndarray) -> np.ndarray:
        """``S^T c``"""
        return self.matrix_t @ c

    def entry(self, i: int, j: int) -> float:
        return float(self.matrix[i, j])


def normalize(g: BipartiteGraph) -> NormalizedOperator:
    return NormalizedOperator(g)


@dataclass(frozen=True)
class QueryVector:
    values: np.ndarray
    allow_zero: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise DimensionMismatch("query vector must be one-dimensional")
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise DataError("query vector entries must be finite and non-negative")
        if not self.allow_zero and not np.any(v > 0):
            raise DataError("query vector is all zero; pass allow_zero=True to permit it")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def is_empty(self) -> bool:
        return not np.any(self.values > 0)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class BiRankConfig:
    """Iteration settings.

    ``seed=None`` starts from the uniform vector ``1/(n_C + n_P)``; an integer
    seed starts from uniform random values.  ``normalize_query`` rescales the
    query vector to sum to one before iterating.
    """

    alpha: float = 0.85
    tolerance: float = 1e-8
    max_iterations: int = 1000
    seed: int | None = None
    normalize_query: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        if int(self.max_iterations) < 1:
            raise ConfigError("max_iterations must be >= 1")


@dataclass
class ScoreSet:
    claim_scores: np.ndarray
    party_scores: np.ndarray
    iterations_used: int
    final_residual: float
    converged: bool
    first_residual: float = 0.0
    alpha: float = float("nan")
    tolerance: float = float("nan")
    residuals: list = field(default_factory=list, repr=False)


def _as_query(q, n_claims: int) -> np.ndarray:
    if isinstance(q, QueryVector):
        v = q.values
    else:
        v = QueryVector(np.asarray(q, dtype=np.float64), allow_zero=True).values
    if v.size != n_claims:
        raise DimensionMismatch(f"query vector has length {v.size}, graph has {n_claims} claims")
    return v


def birank(g: BipartiteGraph, q, cfg: BiRankConfig = BiRankConfig(),
           op: NormalizedOperator | None = None) -> ScoreSet:
    """Iterate the BiRank update rules to a fixed point.

    Stops when ``||x_t - x_{t-1}||_1 / ||x_{t-1}||_1 < tolerance`` for the
    stacked vector ``x = (c, p)``, or after ``max_iterations`` sweeps.  Running
    out of iterations is reported through ``converged=False``.
    """
    c0 = _as_query(q, g.n_claims)
    if cfg.normalize_query and c0.sum() > 0:
        c0 = c0 / c0.sum()
    op = op or NormalizedOperator(g)
    alpha = cfg.alpha
    n_c, n_p = g.n_claims, g.n_parties

    if alpha < 1 and not np.any(c0 > 0):
        # The only fixed point of c = alpha S S^T c is zero.
        return ScoreSet(np.zeros(n_c), np.zeros(n_p), 0, 0.0, True, 0.0, alpha, cfg.tolerance)

    if cfg.seed is None:
        c = np.full(n_c, 1.0 / (n_c + n_p))
        p = np.full(n_p, 1.0 / (n_c + n_p))
    else:
        rng = np.random.default_rng(cfg.seed)
        c = rng.random(n_c)
        p = rng.random(n_p)

    residuals = []
    prior = (1.0 - alpha) * c0
    converged = False
    for it in range(1, int(cfg.max_iterations) + 1):
        c_new = alpha * op.party_to_claim(p) + prior
        p_new = op.claim_to_party(c_new)
        diff = np.abs(c_new - c).sum() + np.abs(p_new - p).sum()
        norm = np.abs(c).sum() + np.abs(p).sum()
        residual = diff / norm if norm > 0 else diff
        residuals.append(float(residual))
        c, p = c_new, p_new
        if residual < cfg.tolerance:
            converged = True
            break
    if not converged:
        logger.warning("BiRank stopped after %d iterations, residual %.3g", it, residuals[-1])
    return ScoreSet(c, p, it, residuals[-1], converged, residuals[0], alpha, cfg.tolerance, residuals)


def birank_direct(g: BipartiteGraph, q, alpha: float) -> ScoreSet:
    """Exact fixed point ``c = (1 - alpha)(I - alpha S S^T)^{-1} c0`` by dense solve.

    Testing oracle for :func:`birank`; limited to graphs with at most
    ``DIRECT_SOLVE_LIMIT`` nodes.
    """
    if g.n_claims + g.n_parties > DIRECT_SOLVE_LIMIT:
        raise TooLarge(f"direct solve limited to {DIRECT_SOLVE_LIMIT} nodes")
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 1.0:
        raise SingularSystem("I - S S^T is singular at alpha = 1")
    c0 = _as_query(q, g.n_claims)
    s = NormalizedOperator(g).matrix.toarray()
    a = np.eye(g.n_claims) - alpha * (s @ s.T)
    try:
        c = (1.0 - alpha) * np.linalg.solve(a, c0)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    # one step of iterative refinement
    c += (1.0 - alpha) * np.linalg.solve(a, c0 - a @ (c / (1.0 - alpha)))
    p = s.T @ c
    return ScoreSet(c, p, 0, 0.0, True, 0.0, alpha, 0.0)


def build_query_vector(g: BipartiteGraph, labels: Mapping[str, ClaimLabel],
                       filing_dates: Mapping[str, dt.date], cutoff: dt.date,
                       mode: str = "binary_historic_fraud") -> QueryVector:
    """Indicator of claims labeled fraud and filed on or before ``cutoff``.

    An all-zero result is allowed but triggers a warning; check
    ``QueryVector.is_empty``.
    """
    if mode != "binary_historic_fraud":
        raise ConfigError(f"unknown query vector mode {mode!r}")
    v = np.zeros(g.n_claims)
    for claim_id, label in labels.items():
        if not g.has_claim(claim_id):
            raise UnknownClaimId(f"label for unknown claim {claim_id!r}")
        if ClaimLabel.parse(label) is not ClaimLabel.FRAUD:
            continue
        try:
            filed = filing_dates[claim_id]
        except KeyError:
            raise DataError(f"labeled claim {claim_id!r} has no filing date") from None
        if filed <= cutoff:
            v[g.claim_index(claim_id)] = 1.0
    q = QueryVector(v, allow_zero=True)
    if q.is_empty:
        warnings.warn("no historic fraud before the cutoff; query vector is all zero", stacklevel=2)
    return q


def write_scores_csv(g: BipartiteGraph, scores: ScoreSet, path) -> None:
    """``node_kind,node_id,score`` with claims first, each in index order."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("node_kind,node_id,score\n")
        for cid, s in zip(g.claim_ids, scores.claim_scores):
            fh.write(f"claim,{cid},{float(s)!r}\n")
        for pid, s in zip(g.party_ids, scores.party_scores):
            fh.write(f"party,{pid},{float(s)!r}\n")


def read_scores_csv(g: BipartiteGraph, path) -> ScoreSet:
    c = np.full(g.n_claims, np.nan)
    p = np.full(g.n_parties, np.nan)
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["node_kind"] == "claim":
                c[g.claim(row["node_id"]).index] = float(row["score"])
            elif row["node_kind"] == "party":
                p[g.party(row["node_id"]).index] = float(row["score"])
            else:
                raise DataError(f"bad node_kind {row['node_kind']!r}")
    if np.isnan(c).any() or np.isnan(p).any():
        raise DataError(f"{path}: scores missing for some nodes")
    return ScoreSet(c, p, 0, 0.0, True)
