import numpy as np
import pandas as pd
import pytest

from fraudnet.birank import BiRankConfig, birank
from fraudnet.errors import UnknownClaimId, UnknownNode
from fraudnet.features import (
    FEATURE_COLUMNS,
    featurize_claims,
    neighborhood_features,
    read_features_csv,
    score_features,
    write_features_csv,
)
from fraudnet.labels import ClaimLabel


@pytest.fixture
def scores(sample_graph):
    q = np.zeros(5)
    q[sample_graph.claim_index("C4")] = 1
    return birank(sample_graph, q, BiRankConfig(tolerance=1e-10))


def test_c1_score_features(sample_graph, scores):
    f = score_features(sample_graph, scores, "C1")
    got = [f.scores0, f.n1_q1, f.n1_med, f.n1_max, f.n2_q1, f.n2_med, f.n2_max]
    expected = [0.1440, 0.1140, 0.1250, 0.2630, 0.1160, 0.1285, 0.2620]
    np.testing.assert_allclose(got, expected, atol=5e-4)


def test_c1_neighborhood_features(sample_graph, sample_labels):
    f = neighborhood_features(sample_graph, sample_labels, "C1")
    assert (f.n1_size, f.n2_size, f.n2_ratio_fraud, f.n2_ratio_nonfraud, f.n2_bin_fraud) == (3, 4, 0.25, 0.25, 1)


def test_isolated_second_shell():
    from fraudnet.graph import build_graph

    g = build_graph([("A", "x", "policyholder")])
    s = birank(g, np.ones(1))
    f = score_features(g, s, "A")
    assert (f.n2_q1, f.n2_med, f.n2_max) == (0.0, 0.0, 0.0)
    nf = neighborhood_features(g, {}, "A")
    assert (nf.n2_size, nf.n2_ratio_fraud, nf.n2_bin_fraud) == (0, 0.0, 0)


def test_table_shape_and_order(sample_graph, scores, sample_labels):
    frame = featurize_claims(sample_graph, scores, sample_labels, ["C5", "C1"])
    assert list(frame.columns) == FEATURE_COLUMNS
    assert list(frame["claim_id"]) == ["C1", "C5"]
    assert frame["n1.size"].dtype == np.int64


def test_empty_targets_header_only(tmp_path, sample_graph, scores):
    frame = featurize_claims(sample_graph, scores, {}, [])
    path = tmp_path / "f.csv"
    write_features_csv(frame, path)
    assert path.read_text() == ",".join(FEATURE_COLUMNS) + "\n"


def test_unknown_target(sample_graph, scores):
    with pytest.raises((UnknownNode, UnknownClaimId)):
        featurize_claims(sample_graph, scores, {}, ["C9"])


def test_features_csv_roundtrip(tmp_path, sample_graph, scores, sample_labels):
    frame = featurize_claims(sample_graph, scores, sample_labels, sample_graph.claim_ids)
    path = tmp_path / "f.csv"
    write_features_csv(frame, path)
    back = read_features_csv(path)
    pd.testing.assert_frame_equal(back, frame, check_dtype=False)


def test_labels_of_target_period_can_be_masked(sample_graph):
    labels = {"C4": ClaimLabel.FRAUD}
    masked = neighborhood_features(sample_graph, {}, "C1")
    full = neighborhood_features(sample_graph, labels, "C1")
    assert masked.n2_bin_fraud == 0 and full.n2_bin_fraud == 1
