"""Intraday jump test on per-interval log returns.

The statistic is ``L_i = |r_i| / sigma_i`` where ``sigma_i^2`` is the
bipower variation of the K-1 returns preceding interval i::

    sigma_i^2 = 1/(K-2) * sum_{j=i-K+2}^{i-1} |r_{j-1}| |r_j|

Interval i is flagged when ``(L_i - C_n) / S_n`` exceeds the Gumbel
quantile ``-log(-log(1 - alpha))`` with ``n = M * T`` and the standard
Lee-Mykland constants (``c = sqrt(2/pi)``)::

    C_n = sqrt(2 ln n)/c - (ln pi + ln ln n) / (2 c sqrt(2 ln n))
    S_n = 1 / (c sqrt(2 ln n))

Returns are taken as one continuous intraday sequence: bar returns never
span the overnight gap, so the bipower window simply runs across session
boundaries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import pandas as pd

from .market_data import BarPanel

C_BIPOWER = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class JumpTestConfig:
    K: int = 240
    alpha: float = 0.01
    M: int = 48
    T: int | None = None  # number of days; taken from the data when None

    def __post_init__(self):
        if self.K < 3:
            raise ValueError("K must be >= 3")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.M < 1:
            raise ValueError("M must be >= 1")


@dataclass(frozen=True)
class JumpEvent:
    instrument_id: str
    session_date: object
    interval_index: int
    day_index: int
    r: float
    L: float
    sign: int
    degenerate: bool = False


def gumbel_threshold(alpha: float) -> float:
    return -math.log(-math.log(1.0 - alpha))


def lm_constants(n: int) -> tuple[float, float]:
    """(C_n, S_n) for ``n`` total intervals."""
    if n < 2:
        raise ValueError(f"need at least 2 intervals in total, got {n}")
    root = math.sqrt(2.0 * math.log(n))
    c = C_BIPOWER
    C = root / c - (math.log(math.pi) + math.log(math.log(n))) / (2.0 * c * root)
    S = 1.0 / (c * root)
    return C, S


def critical_statistic(n: int, alpha: float) -> float:
    """Smallest L_i that is flagged."""
    C, S = lm_constants(n)
    return C + S * gumbel_threshold(alpha)


def bipower_sigma(returns, K: int | None = None) -> float:
    """Jump-robust local volatility from the returns preceding the test interval.

    ``returns`` ends at r_{i-1}; the last K-1 of them are used (all of them
    when ``K`` is None).
    """
    r = np.abs(np.asarray(returns, dtype=float))
    if K is None:
        K = r.size + 1
    if r.size < K - 1:
        raise ValueError(f"need {K - 1} prior returns, got {r.size}")
    r = r[r.size - (K - 1):]
    return float(math.sqrt(np.sum(r[:-1] * r[1:]) / (K - 2)))


def lm_statistic(r: float, sigma_hat: float) -> float:
    """``|r| / sigma_hat``; infinite for a nonzero move after zero volatility."""
    if sigma_hat < 0:
        raise ValueError("sigma_hat must be non-negative")
    if sigma_hat == 0:
        return 0.0 if r == 0 else math.inf
    return abs(r) / sigma_hat


def rolling_bipower_sigma(r: np.ndarray, K: int) -> np.ndarray:
    """sigma_hat for every position of a flat return sequence (NaN where untestable)."""
    a = np.abs(np.asarray(r, dtype=float))
    n = a.size
    out = np.full(n, np.nan)
    if n < K:
        return out
    prod = a[:-1] * a[1:]                      # prod[j-1] = |r_{j-1}| |r_j|
    # window sums rather than cumsum differences keep all-zero windows exactly zero
    s = np.lib.stride_tricks.sliding_window_view(prod, K - 2).sum(axis=1)
    # window starting at prod[m] covers j = m+1 .. m+K-2, i.e. interval i = m+K-1
    out[K - 1:] = np.sqrt(s[: n - K + 1] / (K - 2))
    return out


def lm_statistics(panel: BarPanel, K: int = 240) -> tuple[np.ndarray, np.ndarray]:
    """(L, sigma_hat) arrays shaped like the panel; NaN marks untestable intervals."""
    r = panel.log_return.ravel()
    sig = rolling_bipower_sigma(r, K)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = np.abs(r) / sig
    L[(sig == 0) & (r == 0)] = 0.0
    shape = panel.log_return.shape
    return L.reshape(shape), sig.reshape(shape)


def detect_jumps(panel: BarPanel, config: JumpTestConfig = JumpTestConfig()) -> list[JumpEvent]:
    """Flag jump intervals of one instrument."""
    if panel.intervals_per_day != config.M:
        raise ValueError(f"panel has {panel.intervals_per_day} intervals per day, config says M={config.M}")
    T = config.T if config.T is not None else panel.n_days
    threshold = critical_statistic(config.M * T, config.alpha)
    L, sig = lm_statistics(panel, config.K)
    r = panel.log_return
    flagged = np.argwhere(np.nan_to_num(L, nan=-np.inf) > threshold)
    events = []
    for d, i in flagged:
        ri = float(r[d, i])
        events.append(JumpEvent(panel.instrument, panel.dates[d], int(i), int(d), ri, float(L[d, i]),
                                1 if ri > 0 else -1, bool(sig[d, i] == 0)))
    return events


def events_frame(events: Iterable[JumpEvent]) -> pd.DataFrame:
    rows = [(e.instrument_id, str(e.session_date), e.interval_index, e.r, e.L, e.sign, e.degenerate)
            for e in events]
    return pd.DataFrame(rows, columns=["instrument", "date", "interval", "return", "L", "flag_sign", "degenerate"])


def jump_summary(events: Iterable[JumpEvent]) -> dict:
    """Counts and average returns of positive and negative jumps."""
    events = list(events)
    pos = [e.r for e in events if e.sign > 0]
    neg = [e.r for e in events if e.sign < 0]
    return {
        "positive": {"count": len(pos), "average_return": float(np.mean(pos)) if pos else None},
        "negative": {"count": len(neg), "average_return": float(np.mean(neg)) if neg else None},
        "total": len(events),
    }


def write_summary_json(events: Iterable[JumpEvent], path) -> None:
    with open(path, "w") as fh:
        json.dump(jump_summary(events), fh, indent=2, sort_keys=True)
        fh.write("\n")
