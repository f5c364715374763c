"""File-based pipeline stages.

Each stage reads its inputs from files, writes its outputs into the run
directory and returns a JSON-ready summary that goes into the run manifest.
Timings are kept apart from the manifest so that reruns with the same config
produce byte-identical manifests.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import json
import logging
import platform
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

from fraudnet import __version__
from fraudnet.birank import BiRankConfig, birank, build_query_vector, read_scores_csv, write_scores_csv
from fraudnet.errors import (
    ConfigError,
    CutoffOutOfRange,
    DataError,
    DegenerateTarget,
    LeakageError,
    NoLabeledClaims,
)
from fraudnet.features import (
    NEIGHBORHOOD_FEATURES,
    SCORE_FEATURES,
    featurize_claims,
    read_features_csv,
    write_features_csv,
)
from fraudnet.graph import build_graph, load_graph, read_edge_csv, save_graph
from fraudnet.labels import ClaimLabel, read_labels_csv
from fraudnet.mlkit.dataset import LabeledDataset, make_targets
from fraudnet.mlkit.logistic import fit_logistic, stepwise_select
from fraudnet.mlkit.metrics import auroc, evaluate
from fraudnet.mlkit.splits import stratified_split_indices
from fraudnet.mlkit.validation import ResampleSpec, check_disjoint, cross_validate, permutation_importance, resample
from fraudnet.motifs import enumerate_4cycles, enumerate_6cycles, homophily_report, write_cycles_csv
from fraudnet.synth import RESPONSIBILITY_CODES, SynthConfig, generate

logger = logging.getLogger(__name__)

DATASETS = ("known", "fraud")
GROUPS = ("intr", "score", "nbh", "net", "all")
SKEWED_COLUMNS = ["amount", "amount1", "amount5", "claimAge", "daysReport", "lastClaim"]


@dataclass
class PipelineConfig:
    edges: str | None = None
    intrinsic: str | None = None
    labels: str | None = None
    cutoff: str | None = None
    alpha: float = 0.85
    tolerance: float = 1e-8
    max_iterations: int = 1000
    sample_size: int = 20_000
    smote_ratio: float = 0.15
    smote_k: int = 5
    majority_keep: float = 0.5
    cv_folds: int = 10
    test_fraction: float = 0.30
    importance_repeats: int = 5
    stepwise_criterion: str = "aic"
    log_columns: list = field(default_factory=lambda: list(SKEWED_COLUMNS))
    groups: list = field(default_factory=lambda: list(GROUPS))
    motif_max_degree: int = 100
    seed: int = 0
    out: str = "run"
    threads: int = 1
    synth: dict | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        for name in ("smote_ratio", "test_fraction", "majority_keep"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0 and not (name == "majority_keep" and v == 1.0):
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        for name in ("cv_folds", "importance_repeats", "smote_k", "max_iterations", "motif_max_degree", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be at least 2")
        if self.sample_size < 0:
            raise ConfigError("sample_size must be non-negative")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        bad = set(self.groups) - set(GROUPS)
        if bad:
            raise ConfigError(f"unknown feature groups {sorted(bad)}")
        if self.stepwise_criterion not in ("aic", "pvalue"):
            raise ConfigError(f"unknown stepwise criterion {self.stepwise_criterion!r}")
        if self.cutoff is not None:
            try:
                dt.date.fromisoformat(self.cutoff)
            except ValueError:
                raise ConfigError(f"bad cutoff date {self.cutoff!r}") from None

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        d = dict(d)
        nested = d.pop("pipeline", None)
        if nested is not None:
            d = {**nested, **({"synth": d["synth"]} if "synth" in d else {})}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown settings: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        cfg = cls.from_dict(d)
        # input paths are relative to the config file
        for name in ("edges", "intrinsic", "labels"):
            v = getattr(cfg, name)
            if v is not None and not Path(v).is_absolute():
                setattr(cfg, name, str(path.parent / v))
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def resample_spec(self) -> ResampleSpec:
        return ResampleSpec(self.smote_ratio, self.smote_k, self.majority_keep)


class Run:
    """Paths and bookkeeping for one output directory."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.root = Path(cfg.out)
        self.root.mkdir(parents=True, exist_ok=True)
        self.stages: dict = {}
        self.timings: dict = {}

    def path(self, *parts) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def rel(self, p) -> str:
        try:
            return Path(p).resolve().relative_to(self.root.resolve()).as_posix()
        except ValueError:
            return str(p)

    @property
    def edges(self) -> Path:
        return Path(self.cfg.edges) if self.cfg.edges else self.root / "data" / "edges.csv"

    @property
    def intrinsic(self) -> Path:
        return Path(self.cfg.intrinsic) if self.cfg.intrinsic else self.root / "data" / "intrinsic.csv"

    @property
    def labels(self) -> Path:
        return Path(self.cfg.labels) if self.cfg.labels else self.root / "data" / "labels.csv"

    def stage(self, name, fn):
        t0 = time.perf_counter()
        logger.info("stage %s", name)
        self.stages[name] = fn(self)
        self.timings[name] = round(time.perf_counter() - t0, 3)
        return self.stages[name]

    def manifest(self) -> dict:
        return {
            "version": __version__,
            "libraries": {"numpy": np.__version__, "scipy": scipy.__version__,
                          "pandas": pd.__version__, "python": platform.python_version()},
            # the output directory and thread count do not change any result
            "config": {k: v for k, v in self.cfg.to_dict().items() if k not in ("out", "threads")},
            "seeds": seed_plan(self.cfg.seed),
            "stages": self.stages,
        }

    def write_manifest(self, name: str = "manifest.json") -> Path:
        p = self.path(name)
        p.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        t = self.path(name.replace("manifest", "timings"))
        t.write_text(json.dumps(self.timings, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return p


def seed_plan(seed: int) -> dict:
    """Derived seeds for every random stage, all children of the master seed."""
    children = np.random.SeedSequence(seed).generate_state(5)
    names = ["sample", "split_known", "split_fraud", "experiment_known", "experiment_fraud"]
    return {"master": int(seed), **{n: int(s) for n, s in zip(names, children)}}


# ---------------------------------------------------------------- stages


def stage_generate(run: Run) -> dict:
    settings = dict(run.cfg.synth or {})
    settings.setdefault("seed", run.cfg.seed)
    scfg = SynthConfig.from_dict(settings)
    data = generate(scfg)
    out = run.root / "data"
    paths = data.write(out)
    if run.cfg.cutoff is None:
        run.cfg.cutoff = scfg.default_cutoff.isoformat()
    g = data.graph
    return {
        "synth": scfg.to_dict(),
        "files": {k: run.rel(v) for k, v in paths.items()},
        "n_claims": g.n_claims,
        "n_parties": g.n_parties,
        "n_edges": g.n_edges,
        "n_fraud_true": int(data.is_fraud.sum()),
        "n_rings": len(data.rings),
        "cutoff": run.cfg.cutoff,
    }


def stage_build(run: Run) -> dict:
    if not run.edges.exists():
        raise DataError(f"edge file {run.edges} not found")
    g = build_graph(read_edge_csv(run.edges))
    save_graph(g, run.path("graph.fng"))
    return {
        "edges_file": run.rel(run.edges),
        "n_claims": g.n_claims,
        "n_parties": g.n_parties,
        "n_edges": g.n_edges,
        "weighted": g.is_weighted,
        "max_party_degree": int(np.diff(g.weights_t.indptr).max()),
        "mean_claim_degree": float(g.n_edges / g.n_claims),
    }


def _graph(run: Run):
    p = run.root / "graph.fng"
    if p.exists():
        return load_graph(p)
    return build_graph(read_edge_csv(run.edges))


def _labels(run: Run):
    if not run.labels.exists():
        raise DataError(f"label file {run.labels} not found")
    return read_labels_csv(run.labels)


def resolve_cutoff(cfg: PipelineConfig, dates: dict) -> dt.date:
    """Configured cutoff, or one year before the latest filing date."""
    if not dates:
        raise DataError("no filing dates")
    first, last = min(dates.values()), max(dates.values())
    if cfg.cutoff is None:
        try:
            cutoff = last.replace(year=last.year - 1)
        except ValueError:  # 29 February
            cutoff = last.replace(year=last.year - 1, day=28)
    else:
        cutoff = dt.date.fromisoformat(cfg.cutoff)
    if not first <= cutoff < last:
        raise CutoffOutOfRange(f"cutoff {cutoff} outside the filing range {first}..{last}")
    return cutoff


def stage_birank(run: Run) -> dict:
    g = _graph(run)
    labels, dates = _labels(run)
    cutoff = resolve_cutoff(run.cfg, dates)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        q = build_query_vector(g, labels, dates, cutoff)
    sources = [g.claim_ids[i] for i in np.flatnonzero(q.values)]
    bcfg = BiRankConfig(alpha=run.cfg.alpha, tolerance=run.cfg.tolerance,
                        max_iterations=run.cfg.max_iterations)
    scores = birank(g, q, bcfg)
    write_scores_csv(g, scores, run.path("scores.csv"))
    with open(run.path("query_sources.csv"), "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["claim_id", "filing_date"])
        for cid in sources:
            out.writerow([cid, dates[cid].isoformat()])
    if not scores.converged:
        logger.warning("BiRank stopped after %d iterations, residual %.3g",
                       scores.iterations_used, scores.final_residual)
    return {
        "cutoff": cutoff.isoformat(),
        "alpha": run.cfg.alpha,
        "tolerance": run.cfg.tolerance,
        "n_sources": len(sources),
        "latest_source_date": max((dates[c] for c in sources), default=cutoff).isoformat() if sources else None,
        "iterations": scores.iterations_used,
        "converged": bool(scores.converged),
        "final_residual": float(scores.final_residual),
    }


def target_claims(g, dates: dict, cutoff: dt.date) -> list:
    return [cid for cid in g.claim_ids if cid in dates and dates[cid] > cutoff]


def stage_featurize(run: Run, targets=None) -> dict:
    g = _graph(run)
    labels, dates = _labels(run)
    cutoff = resolve_cutoff(run.cfg, dates)
    scores = read_scores_csv(g, run.root / "scores.csv")
    # neighbours' labels are only known up to the cutoff
    historic = {c: (l if dates[c] <= cutoff else ClaimLabel.UNKNOWN) for c, l in labels.items()}
    if targets is None:
        targets = target_claims(g, dates, cutoff)
    frame = featurize_claims(g, scores, historic, targets)
    write_features_csv(frame, run.path("features.csv"))
    return {"cutoff": cutoff.isoformat(), "n_claims": int(len(frame)), "label_source": "filed on or before cutoff"}


def stage_motifs(run: Run) -> dict:
    g = _graph(run)
    labels, dates = _labels(run)
    cutoff = resolve_cutoff(run.cfg, dates)
    historic = {c: (l if dates[c] <= cutoff else ClaimLabel.UNKNOWN) for c, l in labels.items()}
    cap = run.cfg.motif_max_degree
    n4 = write_cycles_csv(g, enumerate_4cycles(g, cap), run.path("motifs", "cycles4.csv"))
    n6 = write_cycles_csv(g, enumerate_6cycles(g, cap), run.path("motifs", "cycles6.csv"))
    report = homophily_report(g, historic, cap)
    report.write_histograms_csv(run.path("motifs", "homophily.csv"))
    run.path("motifs", "homophily.txt").write_text(report.to_text(), encoding="utf-8")
    return {
        "max_degree": cap,
        "skipped_hubs": report.skipped_hubs,
        "cycles4": n4,
        "cycles6": n6,
        "labelled_cycles4": report.cycle4.total,
        "labelled_cycles6": report.cycle6.total,
    }


def read_intrinsic_csv(path) -> pd.DataFrame:
    frame = pd.read_csv(path, dtype={"claim_id": str, "responsibilityCode": str}, keep_default_na=False)
    if "claim_id" not in frame.columns:
        raise DataError(f"{path}: missing claim_id column")
    return frame


def prepare_intrinsic(frame: pd.DataFrame, log_columns) -> pd.DataFrame:
    """Numeric model inputs: one-hot responsibility code, log1p of skewed columns."""
    out = frame.drop(columns=[c for c in ("fraud",) if c in frame.columns]).copy()
    if "responsibilityCode" in out.columns:
        codes = out.pop("responsibilityCode").str.strip().str.lower()
        bad = sorted(set(codes) - set(RESPONSIBILITY_CODES))
        if bad:
            raise DataError(f"unknown responsibilityCode values {bad}")
        for code in RESPONSIBILITY_CODES[1:]:  # at_fault is the reference level
            out[f"responsibilityCode.{code}"] = (codes == code).astype(np.int64)
    for c in log_columns:
        if c in out.columns:
            v = out[c].to_numpy(dtype=np.float64)
            if (v < 0).any():
                raise DataError(f"column {c} has negative values; cannot log-transform")
            out[c] = np.log1p(v)
    for c in out.columns:
        if c != "claim_id" and not pd.api.types.is_numeric_dtype(out[c]):
            raise DataError(f"intrinsic column {c} is not numeric")
    return out


def _write_dataset(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def stage_make_datasets(run: Run) -> dict:
    cfg = run.cfg
    g = _graph(run)
    labels, dates = _labels(run)
    cutoff = resolve_cutoff(cfg, dates)
    seeds = seed_plan(cfg.seed)
    features = read_features_csv(run.root / "features.csv")
    intrinsic = prepare_intrinsic(read_intrinsic_csv(run.intrinsic), cfg.log_columns)

    target = features[[dates[c] > cutoff for c in features["claim_id"]]]
    codes = np.array([int(labels.get(c, ClaimLabel.UNKNOWN)) for c in target["claim_id"]])
    labeled = np.flatnonzero(codes != ClaimLabel.UNKNOWN)
    unlabeled = np.flatnonzero(codes == ClaimLabel.UNKNOWN)
    if labeled.size == 0:
        raise NoLabeledClaims("no labeled claims in the target period")
    n_sample = min(cfg.sample_size, unlabeled.size)
    if n_sample < cfg.sample_size:
        logger.warning("only %d unlabeled target claims; sample_size %d capped", unlabeled.size, cfg.sample_size)
    if n_sample == 0:
        raise DegenerateTarget("no unlabeled claims sampled; the investigated-claims target would be all ones")
    rng = np.random.default_rng(seeds["sample"])
    rows = np.sort(np.concatenate([labeled, rng.choice(unlabeled, size=n_sample, replace=False)]))
    chosen = target.iloc[rows].reset_index(drop=True)

    sources = set(pd.read_csv(run.root / "query_sources.csv", dtype=str)["claim_id"])
    leaked = sources & set(chosen["claim_id"])
    if leaked:
        raise LeakageError(f"{len(leaked)} query-vector source claims ended up in the datasets")
    if any(dates[c] <= cutoff for c in chosen["claim_id"]):
        raise LeakageError("dataset contains claims filed on or before the cutoff")

    merged = chosen.merge(intrinsic, on="claim_id", how="left", validate="one_to_one")
    missing = merged[intrinsic.columns.drop("claim_id")].isna().any(axis=1)
    if missing.any():
        raise DataError(f"{int(missing.sum())} dataset claims have no intrinsic features")
    y_known, y_fraud = make_targets([labels.get(c, ClaimLabel.UNKNOWN) for c in merged["claim_id"]])
    summary = {"cutoff": cutoff.isoformat(), "n_rows": int(len(merged)), "n_labeled": int(labeled.size),
               "n_unlabeled_sampled": int(n_sample), "n_unlabeled_available": int(unlabeled.size),
               "rows_restricted_to": "filed after cutoff", "datasets": {}}
    groups = {c: "intr" for c in intrinsic.columns if c != "claim_id"}
    groups.update({c: "score" for c in SCORE_FEATURES})
    groups.update({c: "nbh" for c in NEIGHBORHOOD_FEATURES})
    run.path("datasets", "groups.json").write_text(json.dumps(groups, indent=2) + "\n", encoding="utf-8")
    for name, y in (("known", y_known), ("fraud", y_fraud)):
        train, test = stratified_split_indices(y, cfg.test_fraction, seeds[f"split_{name}"])
        check_disjoint(merged["claim_id"].to_numpy()[train], merged["claim_id"].to_numpy()[test])
        for part, idx in (("train", train), ("test", test)):
            frame = merged.iloc[idx].copy()
            frame["target"] = y[idx]
            _write_dataset(frame, run.path("datasets", f"{name}_{part}.csv"))
        summary["datasets"][name] = {
            "n_positive": int(y.sum()), "ratio": float(y.mean()),
            "train_rows": int(train.size), "train_ratio": float(y[train].mean()),
            "test_rows": int(test.size), "test_ratio": float(y[test].mean()),
        }
    return summary


def load_dataset(run: Run, name: str, part: str) -> LabeledDataset:
    frame = pd.read_csv(run.root / "datasets" / f"{name}_{part}.csv", dtype={"claim_id": str})
    groups = json.loads((run.root / "datasets" / "groups.json").read_text(encoding="utf-8"))
    ids = frame.pop("claim_id").to_numpy()
    y = frame.pop("target").to_numpy()
    return LabeledDataset(frame, y, ids, groups)


def group_features(ds: LabeledDataset, group: str) -> list:
    if group == "net":
        return ds.group_columns("score") + ds.group_columns("nbh")
    return ds.group_columns(group)


def _quiet(fn, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*args, **kwargs)


def run_experiment(cfg: PipelineConfig, train: LabeledDataset, test: LabeledDataset, group: str, seed: int):
    """Importance ranking, incremental CV curve, stepwise model and test metrics for one group."""
    feats = group_features(train, group)
    if not feats:
        raise ConfigError(f"feature group {group!r} is empty")
    spec = cfg.resample_spec()
    ss = np.random.SeedSequence(seed)
    s_rank, s_imp, s_cv, s_final = (int(x) for x in ss.generate_state(4))

    balanced, info = resample(train.select(feats), spec, s_rank)
    full = _quiet(fit_logistic, balanced, feats)
    ranking = permutation_importance(full, train.select(feats), auroc, cfg.importance_repeats, s_imp)

    curve = []
    order = [imp.feature for imp in ranking]
    for k in range(1, len(order) + 1):
        cv = cross_validate(train, order[:k], cfg.cv_folds, s_cv, spec, threads=cfg.threads)
        mean, std = cv.mean, cv.std
        curve.append({"n_features": k, "added": order[k - 1],
                      **{f"{m}_mean": mean[m] for m in ("auroc", "aupr", "tdl")},
                      **{f"{m}_std": std[m] for m in ("auroc", "aupr", "tdl")}})

    final_train, final_info = resample(train.select(feats), spec, s_final)
    model = _quiet(stepwise_select, final_train, feats, criterion=cfg.stepwise_criterion)
    selected = list(model.features)
    test_report = evaluate(model.predict_proba(test.features), test.target)
    folds = cross_validate(train, selected, cfg.cv_folds, s_cv, spec, threads=cfg.threads) if selected else None
    return {
        "ranking": ranking,
        "curve": curve,
        "model": model,
        "test": test_report,
        "folds": folds,
        "resampling": final_info,
    }


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for r in rows:
            out.writerow([_fmt(r[h]) for h in header])


def stage_experiment(run: Run) -> dict:
    cfg = run.cfg
    seeds = seed_plan(cfg.seed)
    importance, curves, summary, fold_rows = [], [], [], []
    out = {"groups": list(cfg.groups), "datasets": {}}
    for name in DATASETS:
        train, test = load_dataset(run, name, "train"), load_dataset(run, name, "test")
        ds_out = {}
        for gi, group in enumerate(cfg.groups):
            res = run_experiment(cfg, train, test, group, seeds[f"experiment_{name}"] + gi)
            for rank, imp in enumerate(res["ranking"], start=1):
                importance.append({"dataset": name, "group": group, "rank": rank, "feature": imp.feature,
                                   "importance": imp.mean, "std": imp.std})
            for row in res["curve"]:
                curves.append({"dataset": name, "group": group, **row})
            t = res["test"]
            summary.append({"dataset": name, "group": group, "n_selected": len(res["model"].features),
                            "auroc": t.auroc, "aupr": t.aupr, "tdl": t.tdl})
            if res["folds"] is not None:
                for row in res["folds"].rows():
                    fold_rows.append({"dataset": name, "group": group, **row})
            model = res["model"].to_dict()
            model.update({"seed": seeds[f"experiment_{name}"] + gi,
                          "test_metrics": t.as_row(), "resampling": res["resampling"]})
            run.path("experiment", "models", f"{name}_{group}.json").write_text(
                json.dumps(model, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            ds_out[group] = {"test_auroc": t.auroc, "n_selected": len(res["model"].features),
                             "resampling": res["resampling"]}
        out["datasets"][name] = ds_out
    _write_rows(run.path("experiment", "importance.csv"),
                ["dataset", "group", "rank", "feature", "importance", "std"], importance)
    _write_rows(run.path("experiment", "curves.csv"),
                ["dataset", "group", "n_features", "added", "auroc_mean", "auroc_std",
                 "aupr_mean", "aupr_std", "tdl_mean", "tdl_std"], curves)
    _write_rows(run.path("experiment", "summary.csv"),
                ["dataset", "group", "n_selected", "auroc", "aupr", "tdl"], summary)
    _write_rows(run.path("experiment", "folds.csv"),
                ["dataset", "group", "fold", "auroc", "aupr", "tdl"], fold_rows)
    return out


STAGES = {
    "generate": stage_generate,
    "build": stage_build,
    "birank": stage_birank,
    "featurize": stage_featurize,
    "motifs": stage_motifs,
    "make-datasets": stage_make_datasets,
    "experiment": stage_experiment,
}


def run_pipeline(cfg: PipelineConfig, motifs: bool = True) -> Run:
    """All stages in order; generates synthetic inputs when none are configured."""
    run = Run(cfg)
    if cfg.edges is None:
        run.stage("generate", stage_generate)
    for name in ("build", "birank", "featurize", "motifs", "make-datasets", "experiment"):
        if name == "motifs" and not motifs:
            continue
        run.stage(name, STAGES[name])
    run.write_manifest()
    return run
