"""Immutable bipartite claim-party network.

Claims and parties get dense indices in first-seen order.  Edge weights live
in a CSR matrix ``W`` of shape ``(n_claims, n_parties)``; its transpose is kept
as a second CSR matrix so both orientations are row slices.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np
import scipy.sparse as sp

from fraudnet.errors import (
    ConflictingPartyKind,
    CorruptFile,
    DataError,
    EmptyInput,
    NonPositiveWeight,
    UnknownNode,
    UnsupportedOrder,
)

__all__ = [
    "NodeKind",
    "NodeId",
    "PartyKind",
    "EdgeRecord",
    "Neighborhood",
    "BipartiteGraph",
    "build_graph",
    "read_edge_csv",
    "write_edge_csv",
    "save_graph",
    "load_graph",
]


class NodeKind(enum.Enum):
    CLAIM = "claim"
    PARTY = "party"

    @property
    def other(self) -> "NodeKind":
        return NodeKind.PARTY if self is NodeKind.CLAIM else NodeKind.CLAIM


class NodeId(NamedTuple):
    kind: NodeKind
    index: int

    def __repr__(self):
        return f"{self.kind.value}#{self.index}"


class PartyKind(enum.IntEnum):
    POLICYHOLDER = 0
    BROKER = 1
    EXPERT = 2
    GARAGE = 3

    @classmethod
    def parse(cls, value) -> "PartyKind":
        if isinstance(value, cls):
            return value
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool) and 0 <= value < len(cls):
            return cls(int(value))
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise DataError(f"invalid party kind {value!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class EdgeRecord:
    claim_id: str
    party_id: str
    party_kind: PartyKind | str
    weight: float | None = None
    is_company: bool | None = None


@dataclass(frozen=True)
class Neighborhood:
    origin: NodeId
    order: int
    members: frozenset
    indices: np.ndarray  # sorted member indices, all of kind ``member_kind``

    @property
    def member_kind(self) -> NodeKind:
        return self.origin.kind if self.order % 2 == 0 else self.origin.kind.other

    def __len__(self):
        return len(self.members)

    def __contains__(self, node):
        return node in self.members


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class BipartiteGraph:
    """Finalized claim-party graph.

    Do not construct directly; use :func:`build_graph`, :func:`load_graph` or
    :meth:`from_csr`.
    """

    def __init__(self, claim_ids, party_ids, party_kinds, weights: sp.csr_matrix,
                 party_is_company=None):
        n_c, n_p = weights.shape
        if len(claim_ids) != n_c or len(party_ids) != n_p or len(party_kinds) != n_p:
            raise DataError("id tables do not match weight matrix shape")
        w = weights.tocsr(copy=True)
        w.sum_duplicates()
        w.sort_indices()
        w.data = w.data.astype(np.float64, copy=False)
        if w.nnz and not np.all(w.data > 0):
            raise DataError("stored weights must be strictly positive")
        self._claim_ids = tuple(claim_ids)
        self._party_ids = tuple(party_ids)
        self._claim_index = {c: i for i, c in enumerate(self._claim_ids)}
        self._party_index = {p: j for j, p in enumerate(self._party_ids)}
        if len(self._claim_index) != n_c or len(self._party_index) != n_p:
            raise DataError("duplicate external ids")
        self._kinds = _readonly(np.asarray(party_kinds, dtype=np.int8).copy())
        self._is_company = None
        if party_is_company is not None:
            self._is_company = _readonly(np.asarray(party_is_company, dtype=bool).copy())
        wt = w.T.tocsr()
        wt.sort_indices()
        for m in (w, wt):
            for arr in (m.data, m.indices, m.indptr):
                _readonly(arr)
        self._w = w
        self._wt = wt
        self._claim_deg = _readonly(np.asarray(w.sum(axis=1)).ravel())
        self._party_deg = _readonly(np.asarray(w.sum(axis=0)).ravel())
        if n_c and self._claim_deg.min() <= 0 or n_p and self._party_deg.min() <= 0:
            raise DataError("every node needs at least one edge")

    @classmethod
    def from_csr(cls, claim_ids, party_ids, party_kinds, weights, party_is_company=None):
        return cls(claim_ids, party_ids, party_kinds, sp.csr_matrix(weights), party_is_company)

    # -- sizes and tables ---------------------------------------------------
    @property
    def n_claims(self) -> int:
        return self._w.shape[0]

    @property
    def n_parties(self) -> int:
        return self._w.shape[1]

    @property
    def n_edges(self) -> int:
        return self._w.nnz

    @property
    def total_weight(self) -> float:
        return float(self._w.data.sum())

    @property
    def weights(self) -> sp.csr_matrix:
        """Claim-oriented weight matrix (read-only)."""
        return self._w

    @property
    def weights_t(self) -> sp.csr_matrix:
        """Party-oriented weight matrix, the transpose of :attr:`weights`."""
        return self._wt

    @property
    def claim_degrees(self) -> np.ndarray:
        return self._claim_deg

    @property
    def party_degrees(self) -> np.ndarray:
        return self._party_deg

    @property
    def claim_ids(self) -> tuple:
        return self._claim_ids

    @property
    def party_ids(self) -> tuple:
        return self._party_ids

    @property
    def party_kinds(self) -> np.ndarray:
        return self._kinds

    @property
    def party_is_company(self) -> np.ndarray | None:
        return self._is_company

    @property
    def is_weighted(self) -> bool:
        return bool(np.any(self._w.data != 1.0))

    # -- lookups ------------------------------------------------------------
    def claim(self, ext_id: str) -> NodeId:
        try:
            return NodeId(NodeKind.CLAIM, self._claim_index[ext_id])
        except KeyError:
            raise UnknownNode(f"unknown claim {ext_id!r}") from None

    def party(self, ext_id: str) -> NodeId:
        try:
            return NodeId(NodeKind.PARTY, self._party_index[ext_id])
        except KeyError:
            raise UnknownNode(f"unknown party {ext_id!r}") from None

    def has_claim(self, ext_id: str) -> bool:
        return ext_id in self._claim_index

    def claim_index(self, ext_id: str) -> int:
        return self.claim(ext_id).index

    def external_id(self, node: NodeId) -> str:
        self._check(node)
        table = self._claim_ids if node.kind is NodeKind.CLAIM else self._party_ids
        return table[node.index]

    def party_kind(self, node: NodeId) -> PartyKind:
        self._check(node)
        if node.kind is not NodeKind.PARTY:
            raise UnknownNode(f"{node!r} is not a party")
        return PartyKind(int(self._kinds[node.index]))

    def _check(self, node: NodeId) -> None:
        if not isinstance(node, NodeId) or not isinstance(node.kind, NodeKind):
            raise UnknownNode(f"not a node id: {node!r}")
        n = self.n_claims if node.kind is NodeKind.CLAIM else self.n_parties
        if not 0 <= node.index < n:
            raise UnknownNode(f"node {node!r} out of range")

    def _adj(self, kind: NodeKind) -> sp.csr_matrix:
        return self._w if kind is NodeKind.CLAIM else self._wt

    def degree(self, node: NodeId) -> float:
        """Weighted degree (sum of incident weights)."""
        self._check(node)
        deg = self._claim_deg if node.kind is NodeKind.CLAIM else self._party_deg
        return float(deg[node.index])

    def unweighted_degree(self, node: NodeId) -> int:
        self._check(node)
        m = self._adj(node.kind)
        return int(m.indptr[node.index + 1] - m.indptr[node.index])

    def neighbors(self, node: NodeId) -> np.ndarray:
        """Sorted indices of adjacent nodes (of the opposite kind)."""
        self._check(node)
        m = self._adj(node.kind)
        return m.indices[m.indptr[node.index]:m.indptr[node.index + 1]]

    def edge_weights(self, node: NodeId) -> np.ndarray:
        self._check(node)
        m = self._adj(node.kind)
        return m.data[m.indptr[node.index]:m.indptr[node.index + 1]]

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Yield ``(claim_index, party_index, weight)`` in claim-major order."""
        w = self._w
        for i in range(self.n_claims):
            for k in range(w.indptr[i], w.indptr[i + 1]):
                yield i, int(w.indices[k]), float(w.data[k])

    def shells(self, origin: NodeId, k: int) -> list[np.ndarray]:
        """Disjoint neighborhood shells ``[N^0, N^1, ..., N^k]`` as index arrays.

        Shell ``m`` holds nodes at shortest-path distance exactly ``m``; for
        ``m = 2`` this is the set of same-kind nodes sharing a neighbor with the
        origin, minus the origin itself.
        """
        self._check(origin)
        if origin.kind is NodeKind.CLAIM:
            return bfs_shells(self._w, self._wt, origin.index, k)
        return bfs_shells(self._wt, self._w, origin.index, k)

    def neighborhood(self, origin: NodeId, k: int) -> Neighborhood:
        if not isinstance(k, (int, np.integer)) or k not in (1, 2, 3, 4):
            raise UnsupportedOrder(f"neighborhood order must be 1..4, got {k!r}")
        shell = self.shells(origin, int(k))[-1]
        kind = origin.kind if k % 2 == 0 else origin.kind.other
        members = frozenset(NodeId(kind, int(i)) for i in shell)
        return Neighborhood(origin, int(k), members, _readonly(shell))

    # -- comparisons --------------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        a, b = self._w, other._w
        same_company = (self._is_company is None and other._is_company is None) or (
            self._is_company is not None and other._is_company is not None
            and np.array_equal(self._is_company, other._is_company))
        return (
            self._claim_ids == other._claim_ids
            and self._party_ids == other._party_ids
            and np.array_equal(self._kinds, other._kinds)
            and same_company
            and a.shape == b.shape
            and np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
        )

    __hash__ = None

    def __repr__(self):
        return (f"BipartiteGraph(n_claims={self.n_claims}, n_parties={self.n_parties}, "
                f"n_edges={self.n_edges})")


def bfs_shells(adj, adj_t, origin: int, k: int) -> list[np.ndarray]:
    """Shortest-distance shells ``0..k`` around ``origin`` (k <= 4).

    ``adj`` maps the origin's kind to the other kind and ``adj_t`` maps back.
    """
    shells = [np.array([origin], dtype=np.int64)]
    mats = (adj, adj_t)
    for m in range(1, k + 1):
        frontier = shells[-1]
        reached = np.unique(mats[(m - 1) % 2][frontier].indices) if frontier.size else frontier
        if m >= 2:
            reached = np.setdiff1d(reached, shells[m - 2], assume_unique=True)
        if m >= 4:
            reached = np.setdiff1d(reached, shells[m - 4], assume_unique=True)
        shells.append(reached.astype(np.int64, copy=False))
    return shells


def _unpack(rec):
    if isinstance(rec, EdgeRecord):
        return rec.claim_id, rec.party_id, rec.party_kind, rec.weight, rec.is_company
    rec = tuple(rec)
    if not 3 <= len(rec) <= 5:
        raise DataError(f"edge record needs 3 to 5 fields, got {len(rec)}")
    return rec + (None,) * (5 - len(rec))


def build_graph(records: Iterable) -> BipartiteGraph:
    """Build a graph from ``(claim_id, party_id, party_kind[, weight[, is_company]])`` rows.

    Repeated (claim, party) pairs are merged by summing their weights.  A
    missing weight means 1.  ``is_company`` is kept only if every party has it.
    """
    claim_index: dict[str, int] = {}
    party_index: dict[str, int] = {}
    kinds: list[int] = []
    company: list = []
    rows: list[int] = []
    cols: list[int] = []
    data: list[float] = []
    for row_no, rec in enumerate(records, start=1):
        claim_id, party_id, kind, weight, is_company = _unpack(rec)
        kind = PartyKind.parse(kind)
        if weight is None or weight == "":
            w = 1.0
        else:
            try:
                w = float(weight)
            except (TypeError, ValueError):
                raise NonPositiveWeight(row_no, weight) from None
            if not (w > 0 and math.isfinite(w)):
                raise NonPositiveWeight(row_no, weight)
        claim_id, party_id = str(claim_id), str(party_id)
        i = claim_index.setdefault(claim_id, len(claim_index))
        j = party_index.get(party_id)
        if j is None:
            j = party_index[party_id] = len(party_index)
            kinds.append(int(kind))
            company.append(is_company)
        else:
            if kinds[j] != kind:
                raise ConflictingPartyKind(party_id, PartyKind(kinds[j]).label, kind.label)
            if company[j] is None:
                company[j] = is_company
        rows.append(i)
        cols.append(j)
        data.append(w)
    if not rows:
        raise EmptyInput("no edge records")
    shape = (len(claim_index), len(party_index))
    w = sp.coo_matrix((np.asarray(data), (np.asarray(rows), np.asarray(cols))), shape=shape).tocsr()
    is_company = None
    if all(c is not None for c in company):
        is_company = np.array([bool(c) for c in company])
    return BipartiteGraph(list(claim_index), list(party_index), kinds, w, is_company)


_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f"}


def _parse_bool(value: str | None):
    if value is None or value.strip() == "":
        return None
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise DataError(f"invalid boolean {value!r}")


def read_edge_csv(path) -> Iterator[EdgeRecord]:
    """Stream edge records from ``claim_id,party_id,party_kind[,weight][,is_company]``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"claim_id", "party_id", "party_kind"} - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            yield EdgeRecord(
                row["claim_id"],
                row["party_id"],
                row["party_kind"],
                row.get("weight") or None,
                _parse_bool(row.get("is_company")),
            )


def write_edge_csv(g: BipartiteGraph, path) -> None:
    header = ["claim_id", "party_id", "party_kind", "weight"]
    if g.party_is_company is not None:
        header.append("is_company")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for i, j, w in g.edges():
            row = [g.claim_ids[i], g.party_ids[j], PartyKind(int(g.party_kinds[j])).label, repr(w)]
            if g.party_is_company is not None:
                row.append(int(g.party_is_company[j]))
            out.writerow(row)


# Snapshot layout: magic(8) | version(u16) | payload length(u64) | sha256(32) | payload.
# The payload is an uncompressed .npz archive without pickled objects.
_MAGIC = b"FNGRAPH\x00"
_VERSION = 1
_HEADER = struct.Struct("<8sHQ32s")


def _json_array(values) -> np.ndarray:
    return np.frombuffer(json.dumps(list(values)).encode("utf-8"), dtype=np.uint8)


def save_graph(g: BipartiteGraph, path) -> None:
    buf = io.BytesIO()
    arrays = dict(
        claim_ids=_json_array(g.claim_ids),
        party_ids=_json_array(g.party_ids),
        party_kinds=np.asarray(g.party_kinds),
        indptr=np.asarray(g.weights.indptr, dtype=np.int64),
        indices=np.asarray(g.weights.indices, dtype=np.int64),
        data=np.asarray(g.weights.data),
    )
    if g.party_is_company is not None:
        arrays["is_company"] = np.asarray(g.party_is_company)
    np.savez(buf, **arrays)
    payload = buf.getvalue()
    header = _HEADER.pack(_MAGIC, _VERSION, len(payload), hashlib.sha256(payload).digest())
    Path(path).write_bytes(header + payload)


def load_graph(path) -> BipartiteGraph:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CorruptFile(f"{path}: truncated header")
    magic, version, length, digest = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise CorruptFile(f"{path}: not a graph snapshot")
    if version != _VERSION:
        raise CorruptFile(f"{path}: unsupported snapshot version {version}")
    payload = raw[_HEADER.size:]
    if len(payload) != length:
        raise CorruptFile(f"{path}: expected {length} payload bytes, found {len(payload)}")
    if hashlib.sha256(payload).digest() != digest:
        raise CorruptFile(f"{path}: checksum mismatch")
    with np.load(io.BytesIO(payload), allow_pickle=False) as z:
        claim_ids = json.loads(z["claim_ids"].tobytes().decode("utf-8"))
        party_ids = json.loads(z["party_ids"].tobytes().decode("utf-8"))
        w = sp.csr_matrix((z["data"], z["indices"], z["indptr"]),
                          shape=(len(claim_ids), len(party_ids)))
        is_company = z["is_company"] if "is_company" in z.files else None
        return BipartiteGraph(claim_ids, party_ids, z["party_kinds"], w, is_company)
