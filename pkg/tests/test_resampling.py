import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree

from fraudnet.errors import DegenerateClass, DegenerateFold, LeakageError, TooFewMinority
from fraudnet.mlkit.dataset import LabeledDataset, make_targets
from fraudnet.mlkit.smote import resample_counts, smote
from fraudnet.mlkit.splits import stratified_folds, stratified_split, stratified_split_indices
from fraudnet.mlkit.validation import (
    ResampleSpec,
    check_disjoint,
    cross_validate,
    permutation_importance,
    row_overlap,
)
from fraudnet.mlkit.logistic import fit_logistic


def imbalanced(rng, n, rate, d=2):
    X = rng.normal(size=(n, d))
    y = np.zeros(n, dtype=int)
    y[rng.choice(n, size=max(int(round(rate * n)), 6), replace=False)] = 1
    return X, y


def test_targets():
    known, fraud = make_targets(["yes", "no", "unknown"])
    assert known.tolist() == [1, 1, 0] and fraud.tolist() == [1, 0, 0]
    assert make_targets(["unknown"] * 3)[0].tolist() == [0, 0, 0]
    assert make_targets(["yes"] * 2)[1].tolist() == [1, 1]


def test_ratio_pair_arithmetic():
    # 1.8% of 10 000: 180 minority, 9 820 majority
    m, keep = resample_counts(180, 9820, 0.15, 0.5)
    assert keep == 4910
    assert m == round(0.15 * 4910 / 0.85) == 866
    X, y = imbalanced(np.random.default_rng(0), 10_000, 0.018)
    res = smote(X, y, seed=1)
    assert abs(res.y.sum() - 0.15 * res.y.size) <= 1
    assert res.kept_majority.size == 4910 and res.n_synthetic == 866 - 180


def test_minority_already_large():
    X, y = imbalanced(np.random.default_rng(0), 100, 0.4)
    res = smote(X, y, seed=0)
    assert res.n_synthetic == 0
    np.testing.assert_array_equal(np.sort(res.y), np.sort(y))


def test_synthetics_on_segments_to_neighbours():
    rng = np.random.default_rng(7)
    X, y = imbalanced(rng, 400, 0.05)
    k = 5
    res = smote(X, y, k=k, seed=3)
    minority = X[y == 1]
    z = (minority - X.mean(0)) / X.std(0)
    _, nn = cKDTree(z).query(z, k=k + 1)
    index = {int(i): pos for pos, i in enumerate(np.flatnonzero(y == 1))}
    synth = res.X[-res.n_synthetic:]
    for row, b, nb in zip(synth, res.base, res.neighbor):
        assert index[int(nb)] in nn[index[int(b)]][1:]
        a, c = X[b], X[nb]
        u = np.dot(row - a, c - a) / np.dot(c - a, c - a)
        assert -1e-12 <= u <= 1 + 1e-12
        np.testing.assert_allclose(a + u * (c - a), row, atol=1e-9)


def test_line_segment_and_zero_gap():
    rng = np.random.default_rng(1)
    t = rng.random(12)
    X = np.vstack([np.column_stack([t, 2 * t + 1]), rng.normal(size=(200, 2))])
    y = np.r_[np.ones(12), np.zeros(200)].astype(int)
    res = smote(X, y, seed=0)
    syn = res.X[-res.n_synthetic:]
    np.testing.assert_allclose(syn[:, 1], 2 * syn[:, 0] + 1, atol=1e-12)
    res0 = smote(X, y, seed=0, gap=0.0)
    np.testing.assert_array_equal(res0.X[-res0.n_synthetic:], X[res0.base])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.02, 0.12))
def test_synthetics_inside_minority_box(seed, rate):
    rng = np.random.default_rng(seed)
    X, y = imbalanced(rng, 500, rate, d=3)
    res = smote(X, y, seed=seed)
    lo, hi = X[y == 1].min(0), X[y == 1].max(0)
    syn = res.X[res.y == 1]
    assert np.all(syn >= lo - 1e-12) and np.all(syn <= hi + 1e-12)
    assert abs(res.y.sum() - 0.15 * res.y.size) <= 1


def test_too_few_minority():
    X, y = imbalanced(np.random.default_rng(0), 100, 0.01)
    y[:] = 0
    y[:4] = 1
    with pytest.raises(TooFewMinority):
        smote(X, y, k=5)


def test_split_counts():
    y = np.array([1] * 10 + [0] * 90)
    train, test = stratified_split_indices(y, 0.30, seed=0)
    assert test.size == 30 and y[test].sum() == 3
    assert np.intersect1d(train, test).size == 0
    again = stratified_split_indices(y, 0.30, seed=0)
    np.testing.assert_array_equal(again[1], test)


def test_split_rounding_rule():
    y = np.array([1] * 7 + [0] * 93)
    outcomes = {int(y[stratified_split_indices(y, 0.30, seed=s)[1]].sum()) for s in range(20)}
    assert outcomes == {2}  # floor(0.3 * 7 + 0.5) = 2
    with pytest.raises(DegenerateClass):
        stratified_split_indices(np.array([1] + [0] * 20))


def test_folds_are_stratified_partition():
    y = np.array([1] * 23 + [0] * 177)
    folds = stratified_folds(y, 10, seed=1)
    allrows = np.sort(np.concatenate(folds))
    np.testing.assert_array_equal(allrows, np.arange(200))
    pos = [int(y[f].sum()) for f in folds]
    assert max(pos) - min(pos) <= 1 and min(pos) >= 2
    with pytest.raises(DegenerateFold):
        stratified_folds(np.array([1] * 5 + [0] * 50), 10)


def frame_dataset(rng, n, signal=True):
    x = rng.normal(size=n)
    noise = rng.normal(size=n)
    logit = -2.5 + (2 * x if signal else 0)
    y = (rng.random(n) < 1 / (1 + np.exp(-logit))).astype(int)
    return LabeledDataset(pd.DataFrame({"x": x, "noise": noise}), y)


def test_cv_perfect_feature():
    rng = np.random.default_rng(0)
    y = (rng.random(500) < 0.1).astype(int)
    ds = LabeledDataset(pd.DataFrame({"leak": y + 0.01 * rng.random(500), "z": rng.normal(size=500)}), y)
    cv = cross_validate(ds, ["leak"], folds=5, seed=0)
    assert cv.mean["auroc"] == 1.0


def test_cv_noise_near_half():
    rng = np.random.default_rng(1)
    ds = frame_dataset(rng, 2000, signal=False)
    cv = cross_validate(ds, ["noise"], folds=10, seed=2)
    assert abs(cv.mean["auroc"] - 0.5) <= 0.05
    assert len(cv.rows()) == 10 and cv.rows()[0]["fold"] == 1


def test_cv_deterministic_and_thread_independent():
    ds = frame_dataset(np.random.default_rng(2), 600)
    a = cross_validate(ds, seed=5)
    b = cross_validate(ds, seed=5, threads=3)
    assert a.rows() == b.rows()
    assert a.resampling[0]["k"] == 5


def test_cv_without_resampling():
    ds = frame_dataset(np.random.default_rng(2), 600)
    cv = cross_validate(ds, seed=5, resampling=ResampleSpec(enabled=False))
    assert cv.resampling[0] == {}


def test_leakage_detection():
    check_disjoint(["a", "b"], ["c"])
    with pytest.raises(LeakageError):
        check_disjoint(["a", "b"], ["b", "c"])
    X = np.arange(12.0).reshape(6, 2)
    leaky_test = np.vstack([X[:2], [[100.0, 101.0]]])
    assert row_overlap(X, leaky_test) == 2
    assert row_overlap(X, [[100.0, 101.0]]) == 0


def test_importance_ranks_signal_first():
    ds = frame_dataset(np.random.default_rng(3), 5000)
    fit = fit_logistic(ds)
    imp = permutation_importance(fit, ds, repeats=5, seed=0)
    assert [i.feature for i in imp] == ["x", "noise"]
    assert imp[0].mean > 0.1
    assert abs(imp[1].mean) < 0.01


def test_importance_of_unused_column_is_zero_and_ties_sort_by_name():
    ds = frame_dataset(np.random.default_rng(4), 500)
    ds2 = LabeledDataset(ds.features.assign(b=0.0, a=0.0), ds.target)
    fit = fit_logistic(ds, ["x"])
    imp = permutation_importance(fit, ds2, seed=1)
    assert [i.feature for i in imp] == ["x", "a", "b", "noise"]
    assert imp[1].mean == imp[2].mean == imp[3].mean == 0.0


class _AverageModel:
    features = ["x", "x2"]

    def predict_proba(self, frame):
        return 1 / (1 + np.exp(-(frame["x"] + frame["x2"]).to_numpy()))


def test_duplicated_feature_shares_credit():
    ds = frame_dataset(np.random.default_rng(5), 5000)
    alone = permutation_importance(fit_logistic(ds, ["x"]), ds, seed=0)[0].mean
    twin = LabeledDataset(ds.features.assign(x2=ds.features["x"]), ds.target)
    shared = {i.feature: i.mean for i in permutation_importance(_AverageModel(), twin, seed=0)}
    assert 0 < shared["x"] < alone and 0 < shared["x2"] < alone
