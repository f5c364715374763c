import filecmp

import numpy as np
import pytest

from fraudnet.errors import ConfigError, InfeasibleConfig
from fraudnet.graph import PartyKind
from fraudnet.labels import ClaimLabel
from fraudnet.motifs import enumerate_4cycles, homophily_report
from fraudnet.synth import INTRINSIC_COLUMNS, SynthConfig, generate

SMALL = dict(n_claims=4000, n_parties=1600, n_rings=40, fraud_rate=0.05)


@pytest.fixture(scope="module")
def small():
    return generate(SynthConfig(seed=11, **SMALL))


def truth_codes(data):
    return np.where(data.is_fraud, ClaimLabel.FRAUD, ClaimLabel.NON_FRAUD).astype(np.int8)


def test_missing_seed_and_bad_settings():
    with pytest.raises(ConfigError):
        SynthConfig()
    with pytest.raises(ConfigError):
        SynthConfig.from_dict({"seed": 1, "n_clams": 5})
    with pytest.raises(ConfigError):
        SynthConfig(seed=1, fraud_rate=1.5)


def test_infeasible_rings():
    with pytest.raises(InfeasibleConfig):
        SynthConfig(seed=1, n_claims=100, n_rings=20, ring_size=6)
    with pytest.raises(InfeasibleConfig):
        SynthConfig(seed=1, n_claims=100, ring_size=1)


def test_same_seed_same_files(tmp_path):
    a = generate(SynthConfig(seed=3, **SMALL)).write(tmp_path / "a")
    b = generate(SynthConfig(seed=3, **SMALL)).write(tmp_path / "b")
    for key in a:
        assert filecmp.cmp(a[key], b[key], shallow=False), key
    c = generate(SynthConfig(seed=4, **SMALL)).write(tmp_path / "c")
    assert not filecmp.cmp(a["edges"], c["edges"], shallow=False)


def test_written_columns(small, tmp_path):
    paths = small.write(tmp_path)
    header = open(paths["intrinsic"]).readline().strip().split(",")
    assert header == ["claim_id", *INTRINSIC_COLUMNS, "fraud"]
    assert open(paths["labels"]).readline().strip() == "claim_id,filing_date,fraud"


def test_single_planted_square():
    cfg = SynthConfig(seed=5, n_claims=300, n_parties=400, n_rings=1, ring_size=2,
                      ring_shared_parties=2, ring_party_kinds=["policyholder", "garage"],
                      fraud_rate=2 / 300, homophily_strength=1.0)
    data = generate(cfg)
    fraud = np.flatnonzero(data.is_fraud)
    np.testing.assert_array_equal(fraud, data.rings[0])
    both_fraud = [c for c in enumerate_4cycles(data.graph) if data.is_fraud[list(c.claims)].all()]
    assert len(both_fraud) == 1
    assert set(both_fraud[0].parties) == set(data.ring_parties[0].tolist())


def test_degrees_and_shape():
    cfg = SynthConfig(seed=2, n_claims=20_000, n_parties=8_000)
    data = generate(cfg)
    g = data.graph
    assert abs(g.claim_degrees.mean() - cfg.mean_claim_degree) < 0.1
    assert g.claim_degrees.min() >= 1 and g.party_degrees.min() >= 1
    for kind in PartyKind:
        deg = g.party_degrees[np.asarray(g.party_kinds) == kind]
        assert deg.max() <= cfg.max_degree[kind.label] + cfg.n_rings * cfg.ring_size
    assert int(data.is_fraud.sum()) == round(cfg.fraud_rate * cfg.n_claims)


def test_ring_mates_within_two_steps(small):
    g = small.graph
    for ring in small.rings[:10]:
        origin = g.claim(g.claim_ids[ring[0]])
        second = set(g.shells(origin, 2)[2].tolist())
        assert set(ring[1:].tolist()) <= second


def test_square_homophily_above_null(small):
    report = homophily_report(small.graph, truth_codes(small), max_degree=100)
    q = small.is_fraud.mean()
    assert report.cycle4.frequencies[2] > 10 * q * q


def test_no_homophily_means_rings_look_like_everyone_else():
    cfg = SynthConfig(seed=8, homophily_strength=0.0, **SMALL)
    data = generate(cfg)
    ring = np.concatenate(data.rings)
    rate = data.is_fraud[ring].mean()
    se = np.sqrt(cfg.fraud_rate * (1 - cfg.fraud_rate) / ring.size)
    assert abs(rate - cfg.fraud_rate) < 4 * se


def test_labels_only_reveal_truth(small):
    observed = np.array([small.labels[c] for c in small.graph.claim_ids])
    assert np.all(small.is_fraud[observed == ClaimLabel.FRAUD])
    assert not np.any(small.is_fraud[observed == ClaimLabel.NON_FRAUD])
    frac = (observed[small.is_fraud] == ClaimLabel.FRAUD).mean()
    assert 0.65 < frac < 0.95


def test_intrinsic_signal_direction(small):
    f = small.is_fraud
    assert small.intrinsic["age"][f].mean() < small.intrinsic["age"][~f].mean()
    assert small.intrinsic["daysReport"][f].mean() > small.intrinsic["daysReport"][~f].mean()
