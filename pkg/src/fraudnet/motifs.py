"""4-cycle and 6-cycle enumeration and label homophily statistics.

Cycles are reported in canonical form: the walk starts at the smallest claim
index and heads towards the smaller of that claim's two cycle parties.  A
4-cycle ``(a, p, b, q)`` therefore has ``a < b`` and ``p < q``.

Parties with more than ``max_degree`` edges are treated as hubs and removed
before enumeration, so cycles through them are not reported.  The number of
removed hubs is recorded in :class:`EnumerationStats`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.sparse as sp

from fraudnet.graph import BipartiteGraph, PartyKind, bfs_shells
from fraudnet.labels import ClaimLabel, label_array

DEFAULT_MAX_DEGREE = 10_000


@dataclass(frozen=True, order=True)
class CycleRecord:
    length: int
    claims: tuple
    parties: tuple

    def sequence(self) -> tuple:
        """Alternating walk ``(c0, p0, c1, p1, ...)``; it closes on ``c0``."""
        return tuple(x for pair in zip(self.claims, self.parties) for x in pair)

    def external(self, g: BipartiteGraph) -> tuple:
        return (tuple(g.claim_ids[i] for i in self.claims),
                tuple(g.party_ids[j] for j in self.parties))


def canonical_cycle(claims, parties) -> CycleRecord:
    """Canonicalize the closed walk ``claims[0], parties[0], claims[1], ...``."""
    claims, parties = list(claims), list(parties)
    n = len(claims)
    if n < 2 or len(parties) != n:
        raise ValueError("a cycle alternates equally many claims and parties")
    s = int(np.argmin(claims))
    fwd_c = [claims[(s + t) % n] for t in range(n)]
    fwd_p = [parties[(s + t) % n] for t in range(n)]
    bwd_c = [claims[(s - t) % n] for t in range(n)]
    bwd_p = [parties[(s - 1 - t) % n] for t in range(n)]
    if fwd_p[0] < bwd_p[0]:
        return CycleRecord(2 * n, tuple(fwd_c), tuple(fwd_p))
    return CycleRecord(2 * n, tuple(bwd_c), tuple(bwd_p))


@dataclass
class EnumerationStats:
    skipped_hubs: int = 0


def _pruned(g: BipartiteGraph, max_degree: int, claim_mask, stats):
    """Binary adjacency without hub parties and masked-out claims."""
    w = g.weights
    party_count = np.diff(g.weights_t.indptr)
    hubs = party_count > max_degree
    if stats is not None:
        stats.skipped_hubs = int(hubs.sum())
    keep_party = ~hubs
    keep_claim = np.ones(g.n_claims, bool) if claim_mask is None else np.asarray(claim_mask, bool)
    a = sp.diags(keep_claim.astype(float)) @ sp.csr_matrix(
        (np.ones_like(w.data), w.indices, w.indptr), shape=w.shape) @ sp.diags(keep_party.astype(float))
    a = sp.csr_matrix(a)
    a.eliminate_zeros()
    a.sort_indices()
    at = a.T.tocsr()
    at.sort_indices()
    return a, at


def _row(m, i):
    return m.indices[m.indptr[i]:m.indptr[i + 1]]


def enumerate_4cycles(g: BipartiteGraph, max_degree: int = DEFAULT_MAX_DEGREE,
                      claim_mask=None, stats: EnumerationStats | None = None) -> Iterator[CycleRecord]:
    """Yield every canonical 4-cycle once, ordered by canonical walk.

    ``claim_mask`` restricts enumeration to cycles whose claims all pass it.
    """
    a_mat, at_mat = _pruned(g, max_degree, claim_mask, stats)
    for a in range(g.n_claims):
        ps = _row(a_mat, a)
        if ps.size < 2:
            continue
        bs_list, ps_list = [], []
        for p in ps:
            bs = _row(at_mat, p)
            bs = bs[bs > a]
            if bs.size:
                bs_list.append(bs)
                ps_list.append(np.full(bs.size, p))
        if not bs_list:
            continue
        bs = np.concatenate(bs_list)
        pp = np.concatenate(ps_list)
        order = np.lexsort((pp, bs))
        bs, pp = bs[order], pp[order]
        uniq, start, count = np.unique(bs, return_index=True, return_counts=True)
        for b, s0, k in zip(uniq, start, count):
            if k < 2:
                continue
            shared = pp[s0:s0 + k]
            for x in range(k):
                for y in range(x + 1, k):
                    yield CycleRecord(4, (a, int(b)), (int(shared[x]), int(shared[y])))


def enumerate_6cycles(g: BipartiteGraph, max_degree: int = DEFAULT_MAX_DEGREE,
                      claim_mask=None, stats: EnumerationStats | None = None) -> Iterator[CycleRecord]:
    """Yield every canonical 6-cycle (3 distinct claims, 3 distinct parties) once."""
    a_mat, at_mat = _pruned(g, max_degree, claim_mask, stats)
    in_na = np.zeros(g.n_parties, dtype=bool)
    for a in range(g.n_claims):
        na = _row(a_mat, a)
        if na.size < 2:
            continue
        in_na[na] = True
        batch = []
        for p1 in na:
            for b in _row(at_mat, p1):
                if b <= a:
                    continue
                for p2 in _row(a_mat, b):
                    if p2 == p1:
                        continue
                    cs = _row(at_mat, p2)
                    for c in cs[cs > a]:
                        if c == b:
                            continue
                        p3s = _row(a_mat, c)
                        p3s = p3s[in_na[p3s] & (p3s > p1) & (p3s != p2)]
                        for p3 in p3s:
                            batch.append((a, int(p1), int(b), int(p2), int(c), int(p3)))
        in_na[na] = False
        batch.sort()
        for a_, p1, b, p2, c, p3 in batch:
            yield CycleRecord(6, (int(a_), b, c), (p1, p2, p3))


def count_4cycles(g: BipartiteGraph) -> int:
    """Sum over claim pairs of C(shared parties, 2), via ``A A^T``."""
    w = g.weights
    a = sp.csr_matrix((np.ones_like(w.data), w.indices, w.indptr), shape=w.shape)
    shared = sp.triu(a @ a.T, k=1).data
    return int(np.sum(shared * (shared - 1) // 2))


# -- homophily ---------------------------------------------------------------

@dataclass
class Histogram:
    """Counts of cycles by number of fraudulent claims."""

    support: tuple
    counts: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.get(k, 0) for k in self.support)

    @property
    def empty(self) -> bool:
        return self.total == 0

    @property
    def frequencies(self) -> dict:
        t = self.total
        if t == 0:
            return {}
        return {k: self.counts.get(k, 0) / t for k in self.support}

    def add(self, k: int) -> None:
        self.counts[k] = self.counts.get(k, 0) + 1

    def restricted(self, keys) -> "Histogram":
        """Histogram over a subset of the support, e.g. cycles with at least one fraud."""
        keys = tuple(keys)
        return Histogram(keys, {k: self.counts.get(k, 0) for k in keys})


@dataclass
class HomophilyReport:
    cycle4: Histogram
    cycle6: Histogram
    cycle4_by_composition: dict
    # (order, origin label name) -> (mean fraud ratio, mean non-fraud ratio, n origins)
    neighborhood_ratios: dict
    skipped_hubs: int = 0

    def to_text(self) -> str:
        lines = []
        for name, h in [("cycle4", self.cycle4), ("cycle6", self.cycle6)] + [
                (f"cycle4.{k}", v) for k, v in sorted(self.cycle4_by_composition.items())]:
            lines.append(f"{name}.total={h.total}")
            for k in h.support:
                freq = h.frequencies.get(k)
                lines.append(f"{name}.fraud{k}={'' if freq is None else repr(freq)}")
        for (order, label), (rf, rn, n) in sorted(self.neighborhood_ratios.items()):
            lines.append(f"n{order}.{label}.count={n}")
            lines.append(f"n{order}.{label}.ratioFraud={rf!r}")
            lines.append(f"n{order}.{label}.ratioNonFraud={rn!r}")
        lines.append(f"skipped_hubs={self.skipped_hubs}")
        return "\n".join(lines) + "\n"

    def write_histograms_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["histogram", "n_fraud", "count", "frequency"])
            groups = [("cycle4", self.cycle4), ("cycle6", self.cycle6)]
            groups += [(f"cycle4.{k}", v) for k, v in sorted(self.cycle4_by_composition.items())]
            for name, h in groups:
                freqs = h.frequencies
                for k in h.support:
                    out.writerow([name, k, h.counts.get(k, 0), repr(freqs[k]) if freqs else ""])


def _is_company(g: BipartiteGraph) -> np.ndarray:
    if g.party_is_company is not None:
        return np.asarray(g.party_is_company)
    return np.asarray(g.party_kinds) == PartyKind.GARAGE


def _composition(companies: int) -> str:
    return ("two_people", "person_company", "two_companies")[companies]


def homophily_report(g: BipartiteGraph, labels, max_degree: int = DEFAULT_MAX_DEGREE,
                     orders=(2, 4)) -> HomophilyReport:
    """Label mix of fully labeled 4-/6-cycles and of labeled claims' neighborhoods.

    Neighborhood ratios divide by the full shell size, unknown claims included,
    and are averaged over labeled origins with a non-empty shell.  Hub parties
    (see module docstring) are left out of both computations.
    """
    codes = labels if isinstance(labels, np.ndarray) else label_array(g, labels)
    known = codes != ClaimLabel.UNKNOWN
    fraud = codes == ClaimLabel.FRAUD
    stats = EnumerationStats()
    company = _is_company(g)

    c4 = Histogram((0, 1, 2))
    by_comp = {_composition(k): Histogram((0, 1, 2)) for k in range(3)}
    for cyc in enumerate_4cycles(g, max_degree, claim_mask=known, stats=stats):
        k = int(fraud[list(cyc.claims)].sum())
        c4.add(k)
        by_comp[_composition(int(company[list(cyc.parties)].sum()))].add(k)

    c6 = Histogram((0, 1, 2, 3))
    for cyc in enumerate_6cycles(g, max_degree, claim_mask=known):
        c6.add(int(fraud[list(cyc.claims)].sum()))

    a_mat, at_mat = _pruned(g, max_degree, None, None)
    sums = {}
    for i in np.flatnonzero(known):
        shells = bfs_shells(a_mat, at_mat, int(i), max(orders))
        label = ClaimLabel(int(codes[i])).name.lower()
        for order in orders:
            members = shells[order]
            if members.size == 0:
                continue
            rf = np.count_nonzero(fraud[members]) / members.size
            rn = np.count_nonzero(codes[members] == ClaimLabel.NON_FRAUD) / members.size
            acc = sums.setdefault((order, label), [0.0, 0.0, 0])
            acc[0] += rf
            acc[1] += rn
            acc[2] += 1
    ratios = {key: (s[0] / s[2], s[1] / s[2], s[2]) for key, s in sums.items()}
    return HomophilyReport(c4, c6, by_comp, ratios, stats.skipped_hubs)


def write_cycles_csv(g: BipartiteGraph, cycles, path) -> int:
    """Write ``length,claim_1..3,party_1..3``; 4-cycles leave the third slots blank."""
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["length", "claim_1", "claim_2", "claim_3", "party_1", "party_2", "party_3"])
        for cyc in cycles:
            cl, pa = cyc.external(g)
            pad = [""] * (3 - len(cl))
            out.writerow([cyc.length, *cl, *pad, *pa, *pad])
            n += 1
    return n
