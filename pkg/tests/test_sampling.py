import datetime as dt
import warnings

import numpy as np
import pytest

from prejump.attributes import AttributeMatrix
from prejump.jumps import JumpEvent
from prejump.sampling import (
    ExclusionFilter,
    ExclusionLedger,
    SampleSet,
    WindowSpec,
    build_samples,
    china_preset,
    coordinate_median,
    extract_prejump_windows,
    extract_steady_days,
    filter_masks,
    impute_missing,
    instrument_rng,
    represent_stock,
    steady_days,
    virtual_series,
)
from prejump.synthetic import JumpSpec, generate_synthetic_universe


def matrix(D=80, M=48, A=2, name="X"):
    vals = np.arange(A * D * M, dtype=float).reshape(A, D, M)
    dates = [dt.date(2015, 1, 1) + dt.timedelta(days=d) for d in range(D)]
    return AttributeMatrix(name, dates, tuple(f"a{i}" for i in range(A)), vals, ("none",) * A)


def event(d, i, name="X"):
    return JumpEvent(name, None, i, d, 0.01, 9.0, 1)


def test_jump_at_interval_zero_uses_previous_session():
    m = matrix()
    (w,) = extract_prejump_windows([event(70, 0)], m, WindowSpec(48))
    np.testing.assert_array_equal(w, m.values[:, 69, :])


def test_window_straddles_sessions():
    m = matrix()
    (w,) = extract_prejump_windows([event(70, 10)], m, WindowSpec(48))
    np.testing.assert_array_equal(w[:, :38], m.values[:, 69, 10:])
    np.testing.assert_array_equal(w[:, 38:], m.values[:, 70, :10])


def test_overlapping_windows_both_kept():
    out = extract_prejump_windows([event(70, 5), event(70, 15)], matrix(), WindowSpec(48))
    assert len(out) == 2
    np.testing.assert_array_equal(out[0][:, 10:], out[1][:, :-10])


def test_warmup_and_history_exclusions():
    uni = generate_synthetic_universe(1, 80, JumpSpec(rate_per_day=0.0), seed=0)
    masks = filter_masks(uni.panels[0], [ExclusionFilter.make("warmup", days=60)])
    ledger = ExclusionLedger()
    m = matrix()
    out = extract_prejump_windows([event(30, 5), event(0, 3), event(75, 1)], m, WindowSpec(48), masks, ledger)
    assert len(out) == 1
    assert ledger.total("warmup") == 1 and ledger.total("insufficient-history") == 1
    assert set(ledger.to_frame().columns) == {"instrument", "group", "reason", "count"}


def test_steady_day_gap():
    ok = steady_days([20], 40, 5)
    assert not ok[15:26].any() and ok[14] and ok[26]
    ok0 = steady_days([20], 40, 0)
    assert ok0.sum() == 39 and not ok0[20]
    assert steady_days([], 10, 5).all()


def test_steady_days_warn_when_none():
    m = matrix(D=10)
    with pytest.warns(RuntimeWarning):
        assert extract_steady_days([event(d, 0) for d in range(10)], m) == []


def test_coordinate_median_examples():
    np.testing.assert_array_equal(coordinate_median([np.ones(3), 3 * np.ones(3)]), [2, 2, 2])
    one = np.array([[1.0, 5.0]])
    np.testing.assert_array_equal(coordinate_median([one]), one)


def test_rotation_is_deterministic_and_shared():
    rng = np.random.default_rng(0)
    days = [rng.normal(size=(3, 48)) for _ in range(6)]
    a = virtual_series(days, instrument_rng(7, "S01"))
    b = virtual_series(days, instrument_rng(7, "S01"))
    c = virtual_series(days, instrument_rng(7, "S02"))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    # same shift for every attribute of one day
    for d in range(6):
        shift = int(np.flatnonzero(np.isclose(days[d][0], a[d, 0, 0]))[0])
        np.testing.assert_array_equal(a[d], np.roll(days[d], -shift, axis=1))


def test_represent_stock_groups():
    rng = np.random.default_rng(1)
    pre = [rng.normal(size=(2, 12)) for _ in range(3)]
    steady = [rng.normal(size=(2, 48)) for _ in range(4)]
    pos, neg = represent_stock("S", pre, steady, ("a", "b"), 12, seed=3)
    assert pos.label == 1 and neg.label == 0 and neg.series.shape == (2, 12) and neg.n_windows == 4
    assert represent_stock("S", [], steady, ("a", "b"), 12)[0] is None
    with pytest.raises(ValueError):
        represent_stock("S", pre, steady, ("a", "b"), 60)


def test_impute_missing():
    m = matrix(D=2, M=4, A=1)
    m.values[0, 1, 2] = np.nan
    m.values[0, 0, :] = np.nan
    out = impute_missing(m)
    assert out.values[0, 1, 2] == pytest.approx(np.median([4, 5, 7]))
    assert np.all(out.values[0, 0] == 0)


def test_filters():
    uni = generate_synthetic_universe(1, 70, JumpSpec(rate_per_day=0.0), seed=0)
    p = uni.panels[0]
    p.volume[65] = 0
    sus = ExclusionFilter.make("suspension").mask(p)
    assert sus[65].all() and sus[66].all() and not sus[64].any()
    dr = ExclusionFilter.make("date-range", start=str(p.dates[3]), end=str(p.dates[4])).mask(p)
    assert dr[3:5].all() and dr.sum() == 2 * 48
    f = ExclusionFilter.make("price-limit-run", limit=0.10)
    assert ExclusionFilter.from_dict(f.to_dict()) == f
    p.close[40, 10:14] = p.close[39, -1] * 1.10
    lim = f.mask(p)
    assert not lim[40, 10] and lim[40, 11:14].all() and lim.sum() == 3
    assert [x.kind for x in china_preset()] == ["warmup", "price-limit-run", "suspension", "date-range"]
    with pytest.raises(ValueError):
        ExclusionFilter("holiday")


def test_build_samples_and_json(small_universe, tmp_path):
    from prejump.attributes import compute_attributes, standardize
    from prejump.jumps import detect_jumps

    mats = [standardize(compute_attributes(p)) for p in small_universe.panels]
    events = {p.instrument: detect_jumps(p) for p in small_universe.panels}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ss = build_samples(mats, events, small_universe.panels, WindowSpec(48), seed=5)
    X, y = ss.arrays()
    assert X.shape[1:] == (40, 48) and y[0] == 1 and set(y) <= {0, 1}
    assert np.isfinite(X).all()
    ss.to_json(tmp_path / "s.json")
    back = SampleSet.from_json(tmp_path / "s.json")
    X2, y2 = back.arrays()
    np.testing.assert_array_equal(X, X2)
    np.testing.assert_array_equal(y, y2)
    again = build_samples(mats, events, small_universe.panels, WindowSpec(48), seed=5)
    np.testing.assert_array_equal(again.arrays()[0], X)
