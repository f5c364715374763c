"""Synthetic claim-party networks with planted fraud rings.

The generator produces the three input files of the pipeline: an edge list,
a table of intrinsic claim features and a label file with filing dates.

Party degrees are heavy tailed and capped per party kind.  Rings are groups
of claims that all share the same few parties, which plants 4- and 6-cycles.
Fraud is placed on ring claims with probability ``homophily_strength`` and
uniformly at random otherwise.  Several intrinsic columns carry a fraud signal
scaled by ``intrinsic_signal`` (0 makes them pure noise).
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from fraudnet.errors import ConfigError, InfeasibleConfig
from fraudnet.graph import BipartiteGraph, PartyKind, write_edge_csv
from fraudnet.labels import ClaimLabel, write_labels_csv

logger = logging.getLogger(__name__)

INTRINSIC_COLUMNS = [
    "age", "responsibilityCode", "numContracts", "claimAge", "nClaims1", "nClaims5",
    "lastClaim", "amount1", "amount5", "refused1", "refused5", "atfault1", "atfault5",
    "samesits1", "samesits5", "people", "company", "police", "daysReport", "amount",
]
RESPONSIBILITY_CODES = ("at_fault", "shared", "full_right")

_KINDS = ("policyholder", "broker", "expert", "garage")


@dataclass
class SynthConfig:
    seed: int | None = None
    n_claims: int = 50_000
    n_parties: int = 20_000
    # share of party nodes and of (non-ring) edges per party kind
    party_fractions: dict = field(default_factory=lambda: {
        "policyholder": 0.9636, "broker": 0.0039, "expert": 0.0037, "garage": 0.0288})
    edge_shares: dict = field(default_factory=lambda: {
        "policyholder": 0.4908, "broker": 0.2782, "expert": 0.1513, "garage": 0.0797})
    # Pareto shape of the degree propensities; smaller means heavier tail
    degree_tail: dict = field(default_factory=lambda: {
        "policyholder": 3.0, "broker": 1.1, "expert": 0.9, "garage": 1.2})
    max_degree: dict = field(default_factory=lambda: {
        "policyholder": 60, "broker": 2500, "expert": 2500, "garage": 600})
    company_probability: dict = field(default_factory=lambda: {
        "policyholder": 0.05, "broker": 0.5, "expert": 0.5, "garage": 1.0})
    mean_claim_degree: float = 3.79
    n_rings: int = 100
    ring_size: int = 6
    ring_shared_parties: int = 3
    ring_party_kinds: list = field(default_factory=lambda: ["policyholder", "policyholder", "garage"])
    fraud_rate: float = 0.01
    homophily_strength: float = 0.9
    label_known_rate: float = 0.8
    investigation_rate: float = 0.008
    intrinsic_signal: float = 0.7
    start_date: str = "2015-01-01"
    # two historic years plus one target year keeps enough labelled target claims at 50k claims
    years: int = 3

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.seed is None:
            raise ConfigError("synthetic generation needs an explicit seed")
        for name in ("n_claims", "n_parties", "n_rings", "ring_size", "ring_shared_parties", "years"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for name in ("fraud_rate", "homophily_strength", "label_known_rate", "investigation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v!r}")
        if self.intrinsic_signal < 0:
            raise ConfigError("intrinsic_signal must be non-negative")
        if self.mean_claim_degree < 1:
            raise ConfigError("mean_claim_degree must be at least 1")
        for name in ("party_fractions", "edge_shares", "degree_tail", "max_degree", "company_probability"):
            d = getattr(self, name)
            if set(d) != set(_KINDS):
                raise ConfigError(f"{name} needs exactly the keys {list(_KINDS)}")
        if any(v <= 0 for v in self.degree_tail.values()) or any(v < 1 for v in self.max_degree.values()):
            raise ConfigError("degree_tail must be positive and max_degree at least 1")
        if len(self.ring_party_kinds) != self.ring_shared_parties:
            raise ConfigError("ring_party_kinds must name one kind per shared ring party")
        for k in self.ring_party_kinds:
            PartyKind.parse(k)
        if self.ring_size < 2:
            raise InfeasibleConfig("a ring needs at least two claims")
        if self.ring_size * self.n_rings > self.n_claims:
            raise InfeasibleConfig(
                f"{self.n_rings} rings of {self.ring_size} claims exceed {self.n_claims} claims")
        n_ph = int(round(self.party_fractions["policyholder"] * self.n_parties))
        if n_ph < 1:
            raise InfeasibleConfig("configuration leaves no policyholders")
        try:
            dt.date.fromisoformat(self.start_date)
        except ValueError:
            raise ConfigError(f"bad start_date {self.start_date!r}") from None

    @property
    def start(self) -> dt.date:
        return dt.date.fromisoformat(self.start_date)

    @property
    def horizon_days(self) -> int:
        end = dt.date(self.start.year + self.years, self.start.month, self.start.day)
        return (end - self.start).days

    @property
    def default_cutoff(self) -> dt.date:
        """Start of the last year of the horizon."""
        return dt.date(self.start.year + self.years - 1, self.start.month, self.start.day)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth settings: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SynthConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        return cls.from_dict(d.get("synth", d))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class SyntheticData:
    graph: BipartiteGraph
    labels: dict          # claim id -> ClaimLabel (observed)
    dates: dict           # claim id -> filing date
    intrinsic: dict       # column -> array, aligned with graph claim order
    is_fraud: np.ndarray  # true fraud status per claim
    rings: list           # per ring: array of claim indices
    ring_parties: list    # per ring: array of party indices

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"edges": out / "edges.csv", "intrinsic": out / "intrinsic.csv", "labels": out / "labels.csv"}
        write_edge_csv(self.graph, paths["edges"])
        write_intrinsic_csv(paths["intrinsic"], self.graph.claim_ids, self.intrinsic, self.labels)
        write_labels_csv(paths["labels"], self.labels, self.dates)
        return {k: str(v) for k, v in paths.items()}


def _format(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.2f}"
    return str(v)


def write_intrinsic_csv(path, claim_ids, columns: dict, labels: dict) -> None:
    names = [c for c in INTRINSIC_COLUMNS if c in columns]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["claim_id", *names, "fraud"])
        for i, cid in enumerate(claim_ids):
            out.writerow([cid, *(_format(columns[c][i]) for c in names),
                          ClaimLabel.parse(labels.get(cid, ClaimLabel.UNKNOWN)).csv_value])


def _party_degrees(rng, n: int, edges: int, tail: float, cap: int) -> np.ndarray:
    """Degrees >= 1 summing to about ``edges``, heavy tailed, capped at ``cap``."""
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    propensity = rng.pareto(tail, size=n) + 1.0
    extra = min(max(edges - n, 0), n * (cap - 1))
    deg = np.ones(n, dtype=np.int64)
    # hand out the remaining stubs, re-drawing whatever the cap clips off
    while extra > 0:
        open_ = deg < cap
        p = np.where(open_, propensity, 0.0)
        deg += rng.multinomial(extra, p / p.sum())
        extra = int(np.maximum(deg - cap, 0).sum())
        deg = np.minimum(deg, cap)
    return deg


def _build_edges(cfg: SynthConfig, rng):
    n_c = cfg.n_claims
    counts = {k: int(round(cfg.party_fractions[k] * cfg.n_parties)) for k in _KINDS}
    total_edges = int(round(cfg.mean_claim_degree * n_c)) - cfg.n_rings * cfg.ring_size * cfg.ring_shared_parties
    total_edges = max(total_edges, n_c)
    kind_of, company, claim_of, party_of = [], [], [], []
    offset = 0
    for k in _KINDS:
        n = counts[k]
        want = int(round(cfg.edge_shares[k] * total_edges))
        if k == "policyholder":
            want = max(want, n_c)
        deg = _party_degrees(rng, n, want, cfg.degree_tail[k], cfg.max_degree[k])
        stubs = rng.permutation(np.repeat(np.arange(offset, offset + n), deg))
        if k == "policyholder":
            # every claim gets one policyholder first, the rest land anywhere
            first = stubs[:n_c]
            claims = np.concatenate([rng.permutation(n_c)[: first.size],
                                     rng.integers(0, n_c, size=stubs.size - first.size)])
        else:
            claims = rng.integers(0, n_c, size=stubs.size)
        claim_of.append(claims)
        party_of.append(stubs)
        kind_of.extend([int(PartyKind.parse(k))] * n)
        company.append(rng.random(n) < cfg.company_probability[k])
        offset += n
    return counts, np.array(kind_of, dtype=np.int8), np.concatenate(company), claim_of, party_of, offset


def generate(cfg: SynthConfig) -> SyntheticData:
    """Draw one synthetic dataset; identical configs give identical results."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n_c = cfg.n_claims

    _, kinds, company, claim_of, party_of, n_p = _build_edges(cfg, rng)

    # rings: disjoint claim groups all linked to the same new parties
    ring_claims = rng.permutation(n_c)[: cfg.n_rings * cfg.ring_size].reshape(cfg.n_rings, cfg.ring_size)
    ring_kinds = np.array([int(PartyKind.parse(k)) for k in cfg.ring_party_kinds], dtype=np.int8)
    rings, ring_parties = [], []
    for r in range(cfg.n_rings):
        parties = np.arange(n_p, n_p + cfg.ring_shared_parties)
        n_p += cfg.ring_shared_parties
        claim_of.append(np.repeat(ring_claims[r], cfg.ring_shared_parties))
        party_of.append(np.tile(parties, cfg.ring_size))
        rings.append(np.sort(ring_claims[r]))
        ring_parties.append(parties)
    kinds = np.concatenate([kinds, np.tile(ring_kinds, cfg.n_rings)])
    company_p = np.array([cfg.company_probability[PartyKind(int(k)).label] for k in ring_kinds])
    company = np.concatenate([company, rng.random(cfg.n_rings * cfg.ring_shared_parties) < np.tile(company_p, cfg.n_rings)])

    rows = np.concatenate(claim_of)
    cols = np.concatenate(party_of)
    W = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n_c, n_p))
    W.sum_duplicates()
    W.data[:] = 1.0  # repeated draws of the same pair become one edge
    used = np.flatnonzero(np.diff(W.tocsc().indptr) > 0)
    W = W[:, used].tocsr()
    kinds, company = kinds[used], company[used]
    remap = np.full(n_p, -1)
    remap[used] = np.arange(used.size)
    ring_parties = [remap[p] for p in ring_parties]

    # fraud: a homophily_strength share goes to ring members, the rest anywhere
    n_fraud = int(round(cfg.fraud_rate * n_c))
    pool = ring_claims.ravel()
    n_ring_fraud = min(int(round(cfg.homophily_strength * n_fraud)), pool.size)
    fraud = np.zeros(n_c, dtype=bool)
    fraud[rng.choice(pool, size=n_ring_fraud, replace=False)] = True
    rest = np.flatnonzero(~fraud)
    fraud[rng.choice(rest, size=min(n_fraud - n_ring_fraud, rest.size), replace=False)] = True

    intrinsic = _intrinsic(cfg, rng, fraud)

    # investigation: frauds at label_known_rate, others driven by suspicious traits
    z = (np.log(intrinsic["amount"]) - 7.5) + 0.8 * intrinsic["police"] + 0.05 * intrinsic["daysReport"]
    weight = np.exp(z - z.max())
    p_inv = np.minimum(cfg.investigation_rate * weight * n_c / weight.sum(), 1.0)
    investigated = np.where(fraud, rng.random(n_c) < cfg.label_known_rate, rng.random(n_c) < p_inv)
    observed = np.where(investigated, np.where(fraud, ClaimLabel.FRAUD, ClaimLabel.NON_FRAUD), ClaimLabel.UNKNOWN)

    filed = rng.integers(0, cfg.horizon_days, size=n_c)
    claim_ids = tuple(f"C{i + 1:06d}" for i in range(n_c))
    party_ids = tuple(f"P{j + 1:06d}" for j in range(W.shape[1]))
    g = BipartiteGraph(claim_ids, party_ids, kinds, W, company)
    start = cfg.start
    dates = {cid: start + dt.timedelta(days=int(filed[i])) for i, cid in enumerate(claim_ids)}
    labels = {cid: ClaimLabel(int(observed[i])) for i, cid in enumerate(claim_ids)}
    logger.info("generated %d claims, %d parties, %d edges, %d fraud (%d labelled)",
                n_c, g.n_parties, g.n_edges, int(fraud.sum()), int((observed == ClaimLabel.FRAUD).sum()))
    return SyntheticData(g, labels, dates, intrinsic, fraud, rings, ring_parties)


def _intrinsic(cfg: SynthConfig, rng, fraud: np.ndarray) -> dict:
    n = fraud.size
    s = cfg.intrinsic_signal * fraud  # shift in standard-deviation units
    cols: dict = {}
    cols["age"] = np.clip(np.round(rng.normal(45.0 - 12.0 * s, 13.0)), 18, 90).astype(np.int64)
    cols["responsibilityCode"] = np.array(RESPONSIBILITY_CODES, dtype=object)[
        rng.choice(3, size=n, p=[0.4, 0.2, 0.4])]
    cols["numContracts"] = 1 + rng.poisson(2.0 * np.exp(-0.6 * s))
    cols["claimAge"] = np.round(rng.exponential(60.0 * np.exp(-0.9 * s))).astype(np.int64)
    n1 = rng.poisson(0.3 * np.exp(0.6 * s))
    n5 = n1 + rng.poisson(1.0 * np.exp(0.6 * s))
    cols["nClaims1"], cols["nClaims5"] = n1, n5
    cols["lastClaim"] = np.where(n5 > 0, np.round(rng.exponential(24.0, size=n)), 0).astype(np.int64)
    per_claim = rng.lognormal(7.0, 1.0, size=n)
    cols["amount1"] = np.round(n1 * per_claim, 2)
    cols["amount5"] = np.round(n5 * per_claim * rng.uniform(0.8, 1.2, size=n), 2)
    for prefix, p in (("refused", 0.05), ("atfault", 0.4), ("samesits", 0.3)):
        r1 = rng.binomial(n1, p)
        cols[prefix + "1"] = r1
        cols[prefix + "5"] = r1 + rng.binomial(n5 - n1, p)
    cols["people"] = 1 + rng.poisson(0.8, size=n)
    cols["company"] = rng.poisson(0.5, size=n)
    cols["police"] = (rng.random(n) < 0.25 * np.exp(-0.8 * s)).astype(np.int64)
    cols["daysReport"] = np.round(rng.exponential(8.0 * np.exp(0.8 * s))).astype(np.int64)
    cols["amount"] = np.round(rng.lognormal(7.5 + 0.5 * s, 1.0), 2)
    return cols
