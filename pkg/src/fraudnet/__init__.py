"""Fraud analytics on bipartite claim-party networks."""

__version__ = "0.1.0"

from fraudnet.birank import BiRankConfig, QueryVector, ScoreSet, birank, birank_direct  # noqa: E402
from fraudnet.graph import BipartiteGraph, NodeId, NodeKind, PartyKind, build_graph  # noqa: E402
from fraudnet.labels import ClaimLabel  # noqa: E402

__all__ = [
    "BiRankConfig",
    "BipartiteGraph",
    "ClaimLabel",
    "NodeId",
    "NodeKind",
    "PartyKind",
    "QueryVector",
    "ScoreSet",
    "birank",
    "birank_direct",
    "build_graph",
    "__version__",
]
