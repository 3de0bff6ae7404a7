"""Acceptance criteria, each run at its stated tolerance.

Every test records a verdict through ``acceptance_log.record`` before it
asserts; the terminal summary prints one line per criterion.
"""

import itertools
import os
import time

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from acceptance_log import record
from oracles import dtw_bruteforce, objective_naive, upgma_bruteforce
from prejump import pipeline as pl
from prejump.distances import dtw
from prejump.jumps import JumpTestConfig, detect_jumps, gumbel_threshold
from prejump.mrmr import select_indicators
from prejump.clustering import upgma
from prejump.mutual_information import corrected_mi_ts_class, corrected_mi_ts_ts, rank_stability_test
from prejump.synthetic import JumpSpec, generate_synthetic_universe

DISTANCES = ("euclidean", "chebychev", "dtw")


# --- 1 ---------------------------------------------------------------------

def test_c1_gaussian_mi_accuracy():
    start = time.perf_counter()
    worst = 0.0
    means = {}
    for rho in (0.0, 0.5, 0.9):
        truth = -0.5 * np.log(1 - rho**2)
        vals = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            z = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=1000)
            vals.append(corrected_mi_ts_ts(z[:, :1], z[:, 1:], 3, "euclidean", 100, seed=seed).corrected_value)
        means[rho] = float(np.mean(vals))
        worst = max(worst, abs(means[rho] - truth))
    elapsed = time.perf_counter() - start
    detail = ", ".join(f"rho={r}: {m:.4f}" for r, m in means.items())
    record(1, "accuracy +-0.05", worst <= 0.05, f"{detail}; max error {worst:.4f}")
    record(1, "runtime < 30 s", elapsed < 30, f"{elapsed:.1f} s")
    assert worst <= 0.05 and elapsed < 30


# --- 2 ---------------------------------------------------------------------

@pytest.mark.parametrize("kind", DISTANCES)
def test_c2_baseline_correction(kind):
    vals = []
    for trial in range(50):
        rng = np.random.default_rng(1000 + trial)
        X, Y = rng.normal(size=(500, 48)), rng.normal(size=(500, 48))
        vals.append(corrected_mi_ts_ts(X, Y, 3, kind, 100, seed=trial).corrected_value)
    m = float(np.mean(vals))
    record(2, kind, abs(m) <= 0.02, f"mean corrected {m:+.4f}")
    assert abs(m) <= 0.02


# --- 3 ---------------------------------------------------------------------

@pytest.mark.parametrize("kind", DISTANCES)
def test_c3_class_separability(kind):
    from prejump.mutual_information import Neighborhoods

    rng = np.random.default_rng(3)
    labels = np.repeat([0, 1], 100)
    t = np.linspace(0, 1, 24)
    X = rng.normal(scale=0.3, size=(200, 24)) + np.where(labels[:, None] == 1, np.sin(2 * np.pi * t), 4.0 + t)
    S = Neighborhoods.from_series(X, kind)
    est = corrected_mi_ts_class(S, labels, 3, kind, 100, seed=1).corrected_value
    # the control is a random variable (sd about 0.03 at N=200); its mean over shuffles is tested
    ctl = np.array([corrected_mi_ts_class(S, np.random.default_rng(300 + i).permutation(labels), 3, kind, 100,
                                          seed=i).corrected_value for i in range(50)])
    ok = est >= 0.5 and abs(ctl.mean()) <= 0.05
    record(3, kind, ok, f"separable {est:.3f}; shuffled mean {ctl.mean():+.4f} over 50 "
                        f"(single draws sd {ctl.std():.3f}, {np.mean(np.abs(ctl) <= 0.05):.0%} within 0.05)")
    assert ok


# --- 4 ---------------------------------------------------------------------

def test_c4_jump_test_size():
    uni = generate_synthetic_universe(1, 500, JumpSpec(rate_per_day=0.0), seed=44)
    p = uni.panels[0]
    cfg = JumpTestConfig(K=240, alpha=0.01)
    ev = detect_jumps(p, cfg)
    n_tested = p.log_return.size - (cfg.K - 1)
    upper = stats.binom.ppf(0.995, n_tested, cfg.alpha) / n_tested
    rate = len(ev) / n_tested
    scaled = detect_jumps(p.with_returns(p.log_return * 100), cfg)
    same = [(e.day_index, e.interval_index) for e in ev] == [(e.day_index, e.interval_index) for e in scaled]
    record(4, "size", rate <= upper, f"{len(ev)}/{n_tested} flagged = {rate:.5f}, 99% bound {upper:.5f}")
    record(4, "x100 invariance", same, f"{len(ev)} vs {len(scaled)} flags")
    assert rate <= upper and same


# --- 5 ---------------------------------------------------------------------

def test_c5_jump_test_power():
    g = gumbel_threshold(0.01)
    uni = generate_synthetic_universe(10, 250, JumpSpec(rate_per_day=0.2, size_sigma=(8.0, 14.0)), seed=55)
    cfg = JumpTestConfig(K=240, alpha=0.01)
    hit = total = 0
    for p in uni.panels:
        flagged = {(e.day_index, e.interval_index, e.sign) for e in detect_jumps(p, cfg)}
        for j in uni.jumps:
            if j.instrument != p.instrument or j.day * 48 + j.interval < cfg.K - 1:
                continue
            total += 1
            hit += (j.day, j.interval, j.sign) in flagged
    recall = hit / total
    record(5, "recall >= 95%", recall >= 0.95, f"{hit}/{total} = {recall:.3f}")
    record(5, "Gumbel threshold", abs(g - 4.60015) <= 1e-4, f"{g:.6f}")
    assert recall >= 0.95 and abs(g - 4.60015) <= 1e-4


# --- 6 ---------------------------------------------------------------------

def test_c6_dtw_oracle():
    rng = np.random.default_rng(6)
    mism = 0
    for _ in range(200):
        x = rng.normal(size=rng.integers(1, 7))
        y = rng.normal(size=rng.integers(1, 7))
        mism += dtw(x, y) != dtw_bruteforce(x, y)
    bad = 0
    for _ in range(1000):
        n, m = rng.integers(1, 30, size=2)
        x, y = rng.normal(size=n), rng.normal(size=m)
        bad += dtw(x, x) != 0.0 or dtw(x, y) != dtw(y, x)
    record(6, "brute force (exact)", mism == 0, f"{200 - mism}/200 equal")
    record(6, "identity and symmetry", bad == 0, f"{1000 - bad}/1000 pairs")
    assert mism == 0 and bad == 0


# --- 7 ---------------------------------------------------------------------

def test_c7_mrmr_random_problems():
    rng = np.random.default_rng(7)
    failures = 0
    for _ in range(100):
        P = int(rng.integers(1, 9))
        rel = rng.uniform(0, 1, P)
        R = rng.uniform(0, 1, (P, P))
        red = (R + R.T) / 2
        np.fill_diagonal(red, 0)
        st = select_indicators(rel, red)
        ok = True
        for t, pick in enumerate(st.order):
            S = st.order[:t]
            cand = [q for q in range(P) if q not in S]
            crit = {q: rel[q] - (np.mean([red[q, s] for s in S]) if S else 0.0) for q in cand}
            ok &= crit[pick] >= max(crit.values()) - 1e-12
        prefix = [objective_naive(st.order[:t], rel, red) for t in range(P + 1)]
        ok &= abs(objective_naive(st.selected, rel, red) - max(prefix)) <= 1e-12
        failures += not ok
    record(7, "100 random problems", failures == 0, f"{100 - failures}/100 pass argmax and best-prefix checks")
    assert failures == 0


def test_c7_three_feature_example():
    rel = [1.0, 0.9, 0.4]
    red = np.array([[0, 1.0, 0], [1.0, 0, 0], [0, 0, 0]])
    st = select_indicators(rel, red, ["A", "B", "C"])
    chosen = set(st.selected_names)
    exhaustive = {S: objective_naive(S, rel, red) for r in range(4) for S in itertools.combinations(range(3), r)}
    best = max(exhaustive, key=exhaustive.get)
    detail = (f"selected {sorted(chosen)}; J(A,C)={exhaustive[(0, 2)]:.4f}, "
              f"J(A,B,C)={exhaustive[(0, 1, 2)]:.4f}, exhaustive best {[('A', 'B', 'C')[i] for i in best]}")
    record(7, "{A, C} example", chosen == {"A", "C"}, detail)
    assert chosen == {"A", "C"}


# --- 8 ---------------------------------------------------------------------

def test_c8_upgma_oracle():
    rng = np.random.default_rng(8)
    bad = 0
    for _ in range(100):
        N = int(rng.integers(2, 11))
        pts = rng.normal(size=(N, 3))
        D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        bad += not np.allclose(upgma(D), upgma_bruteforce(D), atol=1e-10)
    x = np.array([0.0, 1.0, 10.0])
    Z = upgma(np.abs(x[:, None] - x[None]))
    line_ok = Z[0, 2] == 1.0 and Z[1, 2] == 9.5 and set(Z[0, :2]) == {0, 1}
    record(8, "O(N^3) recomputation", bad == 0, f"{100 - bad}/100 matrices")
    record(8, "{0,1,10} line", line_ok, f"heights {Z[0, 2]:g}, {Z[1, 2]:g}")
    assert bad == 0 and line_ok


# --- 9 and 10: the bundled planted universe --------------------------------

@pytest.fixture(scope="module")
def planted_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("planted")
    start = time.perf_counter()
    run = pl.run_pipeline(pl.load_config(), out, threads=os.cpu_count() or 1)
    return run, time.perf_counter() - start


def test_c9a_indicators_in_every_setting(planted_run):
    run, _ = planted_run
    table = pd.read_csv(run.path("selected_indicators.csv"), index_col="attribute")
    settings = [c for c in table.columns if c != "all"]
    want = ["V", "RV", "VROC(5)", "VROC(20)"]
    missing = {a: [s for s in settings if not table.loc[a, s]] for a in want}
    ok = len(settings) == 9 and not any(missing.values())
    record(9, "V, RV, VROC selected in all 9 settings", ok,
           ", ".join(f"{a}: {9 - len(m)}/9" for a, m in missing.items()))
    assert ok


def test_c9b_shrinking_window(planted_run):
    run, _ = planted_run
    rep = pd.read_csv(run.path("mi_report.csv"))
    sub = rep[rep["attribute"] == "VROC(5)"].pivot_table(index=["distance", "k"], columns="window",
                                                          values="corrected")
    loss = 1.0 - sub[6].mean() / sub[48].mean()
    per_setting = 1.0 - sub[6] / sub[48]
    record(9, "VROC(5) loses >= 30% at w=6 vs w=48", loss >= 0.30,
           f"mean {sub[48].mean():.3f} -> {sub[6].mean():.3f} ({loss:.0%}); "
           f"per-setting loss {per_setting.min():.0%}..{per_setting.max():.0%}")
    assert loss >= 0.30


def test_c9c_distinct_stocks(planted_run):
    import json

    run, _ = planted_run
    summary = json.loads(run.path("distinct_summary.json").read_text())
    inter = set(summary["all_distances"])
    planted = {"S02", "S03", "S04"}
    ok = planted <= inter
    record(9, "planted distinct stocks in cross-distance intersection", ok,
           f"intersection {sorted(inter)}")
    assert ok


def test_c9d_runtime(planted_run):
    _, elapsed = planted_run
    record(9, "pipeline < 10 min", elapsed < 600, f"{elapsed:.0f} s on {os.cpu_count()} cpu(s)")
    assert elapsed < 600


def test_c10_identical_rankings():
    r = np.arange(1, 41)
    p = rank_stability_test(r, r.copy())
    record(10, "identical rankings p = 1", p == 1.0, f"p = {p}")
    assert p == 1.0


def test_c10_reversed_rankings():
    r = np.arange(1, 41)
    p = rank_stability_test(r, r[::-1])
    record(10, "reversed 40-item rankings p < 0.01", p < 0.01, f"p = {p:.4f}")
    assert p < 0.01


def test_c10_planted_settings_stable(planted_run):
    run, _ = planted_run
    stab = pd.read_csv(run.path("rank_stability.csv"))
    ok = len(stab) == 36 and (stab["p_value"] >= 0.01).all()
    record(10, "36 setting pairs fail to reject at 1%", ok,
           f"{int((stab['p_value'] >= 0.01).sum())}/{len(stab)}, min p = {stab['p_value'].min():.3f}")
    assert ok
