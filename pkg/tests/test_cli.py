import csv
import json

import numpy as np
import pandas as pd
import pytest

from fraudnet.cli import main
from fraudnet.mlkit.validation import ResampleSpec, cross_validate
from fraudnet.pipeline import PipelineConfig, Run, group_features, load_dataset, run_experiment


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def sample_args(sample_files, out):
    edges, labels, cutoff = sample_files
    return ["--edges", str(edges), "--labels", str(labels), "--cutoff", cutoff.isoformat(), "--out", str(out)]


def test_birank_command(sample_files, tmp_path):
    out = tmp_path / "run"
    assert main(["birank", *sample_args(sample_files, out)]) == 0
    scores = {(r["node_kind"], r["node_id"]): float(r["score"]) for r in rows(out / "scores.csv")}
    assert abs(scores[("claim", "C1")] - 0.1437) <= 5e-4
    assert [r["claim_id"] for r in rows(out / "query_sources.csv")] == ["C4"]
    manifest = json.loads((out / "manifest_birank.json").read_text())
    assert manifest["stages"]["birank"]["converged"]
    assert "out" not in manifest["config"]


def test_strict_nonconvergence_exit(sample_files, tmp_path):
    args = ["birank", *sample_args(sample_files, tmp_path / "r"), "--max-iterations", "1"]
    assert main(args) == 0
    assert main([*args, "--strict"]) == 4


def test_featurize_empty_targets(sample_files, tmp_path):
    out = tmp_path / "run"
    assert main(["birank", *sample_args(sample_files, out)]) == 0
    targets = tmp_path / "targets.txt"
    targets.write_text("")
    assert main(["featurize", *sample_args(sample_files, out), "--targets", str(targets)]) == 0
    lines = (out / "features.csv").read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("claim_id,")
    targets.write_text("C1\nC3\n")
    assert main(["featurize", *sample_args(sample_files, out), "--targets", str(targets)]) == 0
    assert [r["claim_id"] for r in rows(out / "features.csv")] == ["C1", "C3"]


def test_motifs_command(sample_files, tmp_path):
    out = tmp_path / "run"
    assert main(["motifs", *sample_args(sample_files, out)]) == 0
    c4 = (out / "motifs" / "cycles4.csv").read_text().splitlines()
    c6 = (out / "motifs" / "cycles6.csv").read_text().splitlines()
    assert c4[1:] == ["4,C1,C3,,P2,P3,"]
    assert c6[1:] == ["6,C1,C2,C5,P1,P4,P3"]
    assert "cycle4.total=0" in (out / "motifs" / "homophily.txt").read_text()


def test_data_and_config_errors(sample_files, tmp_path, capsys):
    edges, labels, _ = sample_files
    assert main(["build", "--edges", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "r")]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text('{"pipeline": {"alpha": 1.5}}')
    assert main(["birank", "--config", str(bad), *sample_args(sample_files, tmp_path / "r")]) == 2
    bad.write_text('{"pipeline": {"no_such_setting": 1}}')
    assert main(["build", "--config", str(bad), "--edges", str(edges), "--out", str(tmp_path / "r")]) == 2
    assert main(["birank", *sample_args(sample_files, tmp_path / "r"), "--cutoff", "1990-01-01"]) == 2
    assert main(["generate", "--out", str(tmp_path / "g"), "--config", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_make_datasets_needs_labeled_targets(sample_files, tmp_path, capsys):
    out = tmp_path / "run"
    args = sample_args(sample_files, out)
    assert main(["birank", *args]) == 0
    assert main(["featurize", *args]) == 0
    intrinsic = tmp_path / "intrinsic.csv"
    intrinsic.write_text("claim_id,amount\n" + "".join(f"C{i},{100 * i}\n" for i in range(1, 6)))
    # every claim after the cutoff is unlabelled
    assert main(["make-datasets", *args, "--intrinsic", str(intrinsic)]) == 3
    assert "no labeled claims" in capsys.readouterr().err


@pytest.fixture(scope="module")
def noise_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("noise")
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps({
        "pipeline": {"cv_folds": 5, "importance_repeats": 2, "sample_size": 3000},
        "synth": {"n_claims": 20000, "n_parties": 8000, "n_rings": 100, "fraud_rate": 0.05,
                  "intrinsic_signal": 0.0}}))
    out = root / "run"
    for stage in ("generate", "build", "birank", "featurize", "make-datasets"):
        assert main([stage, "--config", str(cfg), "--seed", "3", "--out", str(out)]) == 0
    return Run(PipelineConfig(**{**PipelineConfig.from_json(cfg).to_dict(), "out": str(out), "seed": 3}))


def test_noise_only_intrinsic_is_uninformative(noise_run):
    train = load_dataset(noise_run, "fraud", "train")
    cv = cross_validate(train, group_features(train, "intr"), folds=10, seed=0)
    assert abs(cv.mean["auroc"] - 0.5) <= 0.05
    net = cross_validate(train, group_features(train, "net"), folds=10, seed=0)
    assert net.mean["auroc"] > 0.7


def test_injected_label_column_is_caught(noise_run):
    train = load_dataset(noise_run, "fraud", "train")
    test = load_dataset(noise_run, "fraud", "test")
    for ds in (train, test):
        ds.features["leak"] = ds.target.astype(float)
        ds.groups["leak"] = "intr"
    cfg = noise_run.cfg
    res = run_experiment(cfg, train, test, "intr", seed=1)
    assert res["test"].auroc == 1.0
    assert res["ranking"][0].feature == "leak"


def test_dataset_files_respect_cutoff(noise_run):
    labels = pd.read_csv(noise_run.labels, dtype=str).set_index("claim_id")
    sources = set(pd.read_csv(noise_run.root / "query_sources.csv", dtype=str)["claim_id"])
    cutoff = json.loads((noise_run.root / "manifest_make_datasets.json").read_text())[
        "stages"]["make-datasets"]["cutoff"]
    for name in ("known", "fraud"):
        ids = pd.concat([pd.read_csv(noise_run.root / "datasets" / f"{name}_{p}.csv", dtype={"claim_id": str})
                         for p in ("train", "test")])["claim_id"]
        assert ids.is_unique
        assert (labels.loc[ids, "filing_date"] > cutoff).all()
        assert not sources & set(ids)
