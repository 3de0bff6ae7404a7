import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import digamma as sp_digamma

from oracles import mi_ts_class_naive, mi_ts_ts_naive
from prejump.distances import pairwise
from prejump.mutual_information import (
    Neighborhoods,
    attribute_ranks,
    baseline_ts_class,
    corrected_mi_ts_class,
    corrected_mi_ts_ts,
    digamma,
    informativeness_report,
    mi_ts_class,
    mi_ts_ts,
    pairwise_rank_stability,
    rank_stability_test,
    redundancy_matrix,
    zero_baseline,
)


def test_digamma_table_matches_scipy():
    n = np.arange(1, 5000)
    np.testing.assert_allclose(digamma(n), sp_digamma(n), rtol=0, atol=1e-11)
    with pytest.raises(ValueError):
        digamma(np.array([0]))


@pytest.mark.parametrize("kind", ["euclidean", "chebychev", "dtw"])
@pytest.mark.parametrize("k", [1, 3, 5])
def test_ts_ts_matches_naive_loops(kind, k):
    rng = np.random.default_rng(k)
    X = rng.normal(size=(40, 6))
    Y = X + rng.normal(scale=0.7, size=X.shape)
    want = mi_ts_ts_naive(pairwise(X, kind), pairwise(Y, kind), k)
    assert mi_ts_ts(X, Y, k, kind) == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("kind", ["euclidean", "chebychev", "dtw"])
@pytest.mark.parametrize("k", [1, 3, 5])
def test_ts_class_matches_naive_loops(kind, k):
    rng = np.random.default_rng(10 + k)
    labels = np.array([0] * 18 + [1] * 25)
    X = rng.normal(size=(43, 5)) + labels[:, None] * 0.8
    want = mi_ts_class_naive(pairwise(X, kind), labels, k)
    assert mi_ts_class(X, labels, k, kind) == pytest.approx(want, abs=1e-10)


def test_ts_ts_with_ties_matches_naive():
    # integer-valued series make many exact distance ties
    rng = np.random.default_rng(5)
    X = rng.integers(0, 3, size=(30, 3)).astype(float)
    Y = rng.integers(0, 3, size=(30, 3)).astype(float)
    for kind in ("euclidean", "chebychev", "dtw"):
        want = mi_ts_ts_naive(pairwise(X, kind), pairwise(Y, kind), 3)
        assert mi_ts_ts(X, Y, 3, kind) == pytest.approx(want, abs=1e-10)


def test_gaussian_length_one_recovers_closed_form():
    rho = 0.8
    truth = -0.5 * np.log(1 - rho**2)
    rng = np.random.default_rng(0)
    z = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=1000)
    est = corrected_mi_ts_ts(z[:, :1], z[:, 1:], k=3, n_permutations=50)
    assert est.corrected_value == pytest.approx(truth, abs=0.05)
    # the raw value carries a constant offset of about -1/k that the baseline removes
    assert est.baseline == pytest.approx(-1 / 3, abs=0.05)


def test_precomputed_neighbourhoods_reused():
    rng = np.random.default_rng(2)
    X, Y = rng.normal(size=(25, 4)), rng.normal(size=(25, 4))
    P, Q = Neighborhoods.from_series(X, "dtw"), Neighborhoods.from_series(Y, "dtw")
    assert mi_ts_ts(P, Q, 2) == mi_ts_ts(X, Y, 2, "dtw")


def test_corrected_independent_near_zero():
    rng = np.random.default_rng(4)
    X, Y = rng.normal(size=(300, 8)), rng.normal(size=(300, 8))
    est = corrected_mi_ts_ts(X, Y, 3, "euclidean", n_permutations=30, seed=1)
    assert abs(est.corrected_value) < 0.05
    assert est.value - est.baseline == pytest.approx(est.corrected_value)


def test_baseline_is_deterministic_for_a_seed():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(50, 4))
    labels = np.repeat([0, 1], 25)
    a = baseline_ts_class(X, labels, 3, n_permutations=20, seed=9)
    b = baseline_ts_class(X, labels, 3, n_permutations=20, seed=9)
    c = baseline_ts_class(X, labels, 3, n_permutations=20, seed=10)
    assert a == b and a != c


def test_zero_baseline_generic():
    calls = []

    def est(rng):
        v = rng.random()
        calls.append(v)
        return v

    m = zero_baseline(est, 50, seed=3)
    assert len(calls) == 50 and m == pytest.approx(np.mean(calls))
    with pytest.raises(ValueError):
        zero_baseline(est, 0)


def test_class_mi_separated_and_shuffled():
    rng = np.random.default_rng(8)
    labels = np.repeat([0, 1], 100)
    X = rng.normal(size=(200, 10)) + labels[:, None] * 3.0
    est = corrected_mi_ts_class(X, labels, 3, seed=2)
    assert est.corrected_value > 0.5
    shuffled = rng.permutation(labels)
    ctl = corrected_mi_ts_class(X, shuffled, 3, seed=2)
    assert abs(ctl.corrected_value) < 0.05


def test_class_mi_validation():
    X = np.zeros((6, 2))
    with pytest.raises(ValueError, match="two classes"):
        mi_ts_class(X, [1] * 6)
    with pytest.raises(ValueError, match="members"):
        mi_ts_class(X + np.arange(6)[:, None], [0, 0, 0, 1, 1, 1], k=3)
    with pytest.raises(ValueError):
        mi_ts_ts(X, X, k=6)


def test_strict_mode_rejects_zero_counts():
    X = np.arange(10.0)[:, None]
    with pytest.raises(ValueError, match="strict"):
        mi_ts_ts(X, X, k=1, strict=True)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_ts_ts_symmetric_in_arguments(seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(20, 3)), rng.normal(size=(20, 3))
    assert mi_ts_ts(X, Y, 2) == pytest.approx(mi_ts_ts(Y, X, 2), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 100))
def test_ts_class_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    labels = np.repeat([0, 1], 12)
    X = rng.normal(size=(24, 4))
    assert mi_ts_class(X * scale, labels, 2) == pytest.approx(mi_ts_class(X, labels, 2), abs=1e-9)


def test_report_and_ranks():
    rng = np.random.default_rng(12)
    labels = np.repeat([0, 1], 30)
    samples = rng.normal(size=(60, 3, 12))
    samples[:, 0, -4:] += labels[:, None] * 2.0
    rep = informativeness_report(samples, labels, ["a", "b", "c"], distances=["euclidean"],
                                 ks=[3], windows=[12, 4], n_permutations=20)
    assert len(rep) == 6
    ranks = attribute_ranks(rep, window=4)
    assert ranks.loc["a"].iloc[0] == 1.0
    with pytest.raises(ValueError):
        informativeness_report(samples, labels, ["a", "b", "c"], windows=[13])


def test_redundancy_matrix_shape():
    rng = np.random.default_rng(13)
    s = rng.normal(size=(40, 3, 6))
    s[:, 1] = s[:, 0] + 0.1 * rng.normal(size=(40, 6))
    R = redundancy_matrix(s, n_permutations=10)
    assert np.array_equal(R, R.T) and np.all(np.diag(R) == 0)
    assert R[0, 1] > R[0, 2]


def test_rank_stability():
    r = np.arange(1, 41)
    assert rank_stability_test(r, r) == 1.0
    assert rank_stability_test(r, r[::-1]) > 0.01  # symmetric differences, median zero
    assert rank_stability_test(r, r + 3) < 0.01
    with pytest.raises(ValueError):
        rank_stability_test([1, 2], [1])
    import pandas as pd

    table = pd.DataFrame({"s1": r, "s2": r, "s3": r + 1})
    pw = pairwise_rank_stability(table)
    assert len(pw) == 3
