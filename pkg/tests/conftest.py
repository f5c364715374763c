import datetime as dt

import numpy as np
import pytest

from fraudnet.graph import build_graph
from fraudnet.labels import ClaimLabel

# Five claims and four parties: C1 joins P1-P3, P2/P3 close a 4-cycle through
# C3, and C2-P4-C5 closes a 6-cycle through P1 and P3.
SAMPLE_EDGES = [
    ("C1", "P1", "policyholder"),
    ("C1", "P2", "policyholder"),
    ("C1", "P3", "garage"),
    ("C2", "P1", "policyholder"),
    ("C2", "P4", "policyholder"),
    ("C3", "P2", "policyholder"),
    ("C3", "P3", "garage"),
    ("C4", "P3", "garage"),
    ("C5", "P3", "garage"),
    ("C5", "P4", "policyholder"),
]
SAMPLE_LABELS = {"C2": ClaimLabel.NON_FRAUD, "C4": ClaimLabel.FRAUD}


@pytest.fixture
def sample_graph():
    return build_graph(SAMPLE_EDGES)


@pytest.fixture
def sample_labels():
    return dict(SAMPLE_LABELS)


@pytest.fixture
def sample_files(tmp_path):
    """Edge and label files for the sample network; C4 is historic fraud."""
    edges = tmp_path / "edges.csv"
    edges.write_text("claim_id,party_id,party_kind,weight\n"
                     + "".join(f"{c},{p},{k},1\n" for c, p, k in SAMPLE_EDGES))
    dates = {"C1": "2020-03-01", "C2": "2019-05-01", "C3": "2020-02-01", "C4": "2019-06-01", "C5": "2020-04-01"}
    text = {"C2": "no", "C4": "yes"}
    labels = tmp_path / "labels.csv"
    labels.write_text("claim_id,filing_date,fraud\n"
                      + "".join(f"{c},{d},{text.get(c, 'unknown')}\n" for c, d in dates.items()))
    return edges, labels, dt.date(2019, 12, 31)


def random_graph(rng, n_claims, n_parties, density=0.3, weighted=False):
    """Random bipartite graph in which every claim and party has an edge."""
    adj = rng.random((n_claims, n_parties)) < density
    for i in range(n_claims):
        adj[i, rng.integers(n_parties)] = True
    for j in range(n_parties):
        adj[rng.integers(n_claims), j] = True
    records = []
    for i, j in zip(*np.nonzero(adj)):
        w = float(rng.uniform(0.1, 5.0)) if weighted else 1.0
        records.append((f"c{i}", f"p{j}", "policyholder", w))
    return build_graph(records)


def pytest_terminal_summary(terminalreporter):
    import sys

    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
