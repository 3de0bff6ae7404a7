import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bipower_naive
from prejump.jumps import (
    JumpTestConfig,
    bipower_sigma,
    critical_statistic,
    detect_jumps,
    events_frame,
    gumbel_threshold,
    jump_summary,
    lm_constants,
    lm_statistic,
    lm_statistics,
    rolling_bipower_sigma,
    write_summary_json,
)
from prejump.synthetic import JumpSpec, generate_synthetic_universe


def test_gumbel_threshold_value():
    assert gumbel_threshold(0.01) == pytest.approx(4.60015, abs=1e-4)


def test_bipower_hand_examples():
    assert bipower_sigma([0.003] * 10, K=6) == pytest.approx(0.003)
    assert bipower_sigma([-0.002] * 10, K=6) == pytest.approx(0.002)
    assert bipower_sigma([0.0] * 5, K=6) == 0.0
    # five returns 0.01, 0.02, ... give four adjacent products of 0.0002
    alt = [0.01, 0.02, 0.01, 0.02, 0.01]
    assert bipower_sigma(alt, K=6) ** 2 == pytest.approx(0.0002)
    assert bipower_sigma(alt, K=6) == pytest.approx(0.01414, abs=1e-5)
    with pytest.raises(ValueError):
        bipower_sigma([0.01] * 3, K=6)


def test_statistic_examples():
    assert lm_statistic(0.01, 0.01) == 1.0
    assert lm_statistic(0.0, 0.01) == 0.0
    assert lm_statistic(0.05, 0.01) == pytest.approx(5.0)
    assert lm_statistic(-0.05, 0.01) == pytest.approx(5.0)
    assert lm_statistic(0.0, 0.0) == 0.0
    assert lm_statistic(0.01, 0.0) == math.inf


def test_lm_constants_reject_small_n():
    with pytest.raises(ValueError):
        lm_constants(1)
    C, S = lm_constants(48 * 250)
    assert critical_statistic(48 * 250, 0.01) == pytest.approx(C + S * gumbel_threshold(0.01))


def test_config_validation():
    with pytest.raises(ValueError):
        JumpTestConfig(K=2)
    with pytest.raises(ValueError):
        JumpTestConfig(alpha=1.5)


def test_rolling_matches_direct_sum():
    rng = np.random.default_rng(0)
    r = rng.normal(scale=0.01, size=400)
    K = 30
    sig = rolling_bipower_sigma(r, K)
    assert np.isnan(sig[: K - 1]).all()
    for i in range(K - 1, 400, 7):
        assert sig[i] == pytest.approx(bipower_naive(r, i, K), rel=1e-10)
        assert sig[i] == pytest.approx(bipower_sigma(r[:i], K), rel=1e-10)


def test_rolling_short_input_all_untestable():
    assert np.isnan(rolling_bipower_sigma(np.ones(5), 10)).all()


def _null_panel(n_days=100, seed=0):
    return generate_synthetic_universe(1, n_days, JumpSpec(rate_per_day=0.0), seed=seed).panels[0]


def test_untestable_intervals_are_skipped():
    p = _null_panel()
    L, sig = lm_statistics(p, K=240)
    assert np.isnan(L.ravel()[:239]).all()
    assert np.isfinite(L.ravel()[239:]).all()


def test_degenerate_volatility_flagged():
    p = _null_panel()
    r = np.zeros_like(p.log_return)
    r[80, 10] = 0.01
    events = detect_jumps(p.with_returns(r), JumpTestConfig(K=240))
    assert len(events) == 1
    e = events[0]
    assert e.degenerate and e.L == math.inf and (e.day_index, e.interval_index) == (80, 10)


def test_planted_jump_flagged_with_sign():
    uni = generate_synthetic_universe(1, 100, JumpSpec(rate_per_day=0.0, planted=((70, 20, 10.0),)), seed=5)
    events = detect_jumps(uni.panels[0])
    hits = [(e.day_index, e.interval_index, e.sign) for e in events]
    assert (70, 20, 1) in hits
    neg = generate_synthetic_universe(1, 100, JumpSpec(rate_per_day=0.0, planted=((70, 20, -10.0),)), seed=5)
    assert (70, 20, -1) in [(e.day_index, e.interval_index, e.sign) for e in detect_jumps(neg.panels[0])]


def test_interval_count_mismatch_rejected():
    with pytest.raises(ValueError):
        detect_jumps(_null_panel(), JumpTestConfig(M=24))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.sampled_from([0.01, 3.0, 100.0, 1e4]))
def test_scale_invariance(seed, scale):
    uni = generate_synthetic_universe(1, 62, JumpSpec(rate_per_day=0.5), seed=seed)
    p = uni.panels[0]
    a = detect_jumps(p, JumpTestConfig(K=100))
    b = detect_jumps(p.with_returns(p.log_return * scale), JumpTestConfig(K=100))
    assert [(e.day_index, e.interval_index) for e in a] == [(e.day_index, e.interval_index) for e in b]


def test_summary_and_frame(tmp_path):
    uni = generate_synthetic_universe(1, 80, JumpSpec(rate_per_day=0.5), seed=2)
    ev = detect_jumps(uni.panels[0])
    s = jump_summary(ev)
    assert s["total"] == len(ev) == s["positive"]["count"] + s["negative"]["count"]
    if s["positive"]["count"]:
        assert s["positive"]["average_return"] > 0
    df = events_frame(ev)
    assert list(df.columns) == ["instrument", "date", "interval", "return", "L", "flag_sign", "degenerate"]
    write_summary_json(ev, tmp_path / "s.json")
    assert (tmp_path / "s.json").read_text().endswith("\n")
    assert jump_summary([])["positive"]["average_return"] is None
