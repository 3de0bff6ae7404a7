"""Synthetic 5-minute bar universes with planted jumps.

Log prices follow a driftless Brownian motion simulated on ``substeps``
points per interval, with compound-Poisson jumps (Merton style) added at a
random sub-step of the jump interval. Volume, trade counts, spreads and
imbalances come from a small parameterized book model. A
:class:`PrejumpPattern` can raise volume and volatility over the intervals
leading up to every jump of a stock, which is what planted-pattern tests
look for downstream.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import pandas as pd

from .market_data import BarPanel, SessionTemplate


@dataclass(frozen=True)
class JumpSpec:
    """Jump arrivals and sizes.

    Sizes are magnitudes in units of the stock's per-interval volatility;
    ``size_sigma`` is either a fixed magnitude or a (low, high) range drawn
    uniformly. ``planted`` adds deterministic jumps as (day, interval,
    signed size in sigma units).
    """

    rate_per_day: float = 0.1
    size_sigma: float | tuple[float, float] = (8.0, 14.0)
    p_positive: float = 0.5
    planted: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if self.rate_per_day < 0:
            raise ValueError("rate_per_day must be non-negative")
        lo, hi = self.size_range
        if lo <= 0 or hi < lo:
            raise ValueError(f"invalid jump size {self.size_sigma!r}: magnitudes must be positive")
        if any(size == 0 for _, _, size in self.planted):
            raise ValueError("planted jump of size 0")
        if not 0 <= self.p_positive <= 1:
            raise ValueError("p_positive must lie in [0, 1]")

    @property
    def size_range(self) -> tuple[float, float]:
        if isinstance(self.size_sigma, (int, float)):
            return float(self.size_sigma), float(self.size_sigma)
        lo, hi = self.size_sigma
        return float(lo), float(hi)


@dataclass(frozen=True)
class PrejumpPattern:
    """Abnormal activity in the intervals before each jump.

    A factor ``f`` with onset ``n`` multiplies the affected quantity over the
    ``n`` intervals before the jump: a ``"ramp"`` rises linearly to ``f`` in
    the interval just before the jump, a ``"step"`` holds ``f`` over the
    whole onset. Volume and volatility have their own shapes.
    """

    volume_factor: float = 1.0
    volume_onset: int = 6
    volatility_factor: float = 1.0
    volatility_onset: int = 24
    volume_shape: str = "ramp"
    volatility_shape: str = "ramp"

    def __post_init__(self):
        if self.volume_shape not in ("ramp", "step") or self.volatility_shape not in ("ramp", "step"):
            raise ValueError("shape must be 'ramp' or 'step'")
        if self.volume_factor <= 0 or self.volatility_factor <= 0:
            raise ValueError("factors must be positive")
        if self.volume_onset < 1 or self.volatility_onset < 1:
            raise ValueError("onsets must be >= 1")

    @staticmethod
    def profile(factor: float, onset: int, shape: str = "ramp") -> np.ndarray:
        """Multipliers for intervals 1..onset before the jump (index 0 = just before)."""
        j = np.arange(1, onset + 1)
        w = (onset - j + 1) / onset if shape == "ramp" else np.ones(onset)
        return 1.0 + (factor - 1.0) * w


@dataclass(frozen=True)
class GroundTruthJump:
    instrument: str
    day: int
    date: dt.date
    interval: int
    size: float
    sign: int


@dataclass
class SyntheticUniverse:
    panels: list[BarPanel]
    jumps: list[GroundTruthJump]
    sigma: dict[str, float]

    def jump_log(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(j.instrument, j.day, j.date.isoformat(), j.interval, j.size, j.sign) for j in self.jumps],
            columns=["instrument", "day", "date", "interval", "size", "sign"],
        )


def business_dates(n_days: int, start: dt.date = dt.date(2014, 1, 2)) -> list[dt.date]:
    first = np.busday_offset(np.datetime64(start), 0, roll="forward")
    days = np.busday_offset(first, np.arange(n_days))
    return [d.astype(dt.date) for d in days]


def _simulate_stock(rng: np.random.Generator, name: str, n_days: int, M: int, jump_spec: JumpSpec,
                    pattern: PrejumpPattern | None, sigma: float, substeps: int, dates):
    G = n_days * M
    # jump positions (global interval index -> signed size in sigma units)
    jumps: dict[int, float] = {}
    lo, hi = jump_spec.size_range
    if jump_spec.rate_per_day > 0:
        counts = rng.poisson(jump_spec.rate_per_day, n_days)
        for d in np.flatnonzero(counts):
            for i in rng.choice(M, size=min(counts[d], M), replace=False):
                mag = rng.uniform(lo, hi)
                sign = 1.0 if rng.random() < jump_spec.p_positive else -1.0
                jumps[int(d * M + i)] = sign * mag
    for d, i, size in jump_spec.planted:
        if not (0 <= d < n_days and 0 <= i < M):
            raise ValueError(f"planted jump ({d}, {i}) outside the simulated range")
        jumps[int(d * M + i)] = float(size)

    vol_mult = np.ones(G)
    volu_mult = np.ones(G)
    if pattern is not None:
        pv = pattern.profile(pattern.volatility_factor, pattern.volatility_onset, pattern.volatility_shape)
        pu = pattern.profile(pattern.volume_factor, pattern.volume_onset, pattern.volume_shape)
        for g in jumps:
            for mult, prof in ((vol_mult, pv), (volu_mult, pu)):
                idx = g - 1 - np.arange(prof.size)
                ok = idx >= 0
                mult[idx[ok]] = np.maximum(mult[idx[ok]], prof[ok])

    z = rng.standard_normal((G, substeps))
    incr = z * (sigma * vol_mult / np.sqrt(substeps))[:, None]
    jump_pos = rng.integers(0, substeps, size=G)
    for g, size in jumps.items():
        incr[g, jump_pos[g]] += size * sigma
    incr = incr.reshape(n_days, M * substeps)
    gaps = rng.normal(0.0, 4 * sigma, n_days)
    gaps[0] = np.log(rng.uniform(10.0, 50.0))
    day_open = np.cumsum(gaps + np.concatenate(([0.0], incr.sum(axis=1)[:-1])))
    path = day_open[:, None] + np.cumsum(incr, axis=1)          # log price after each sub-step
    path = path.reshape(n_days, M, substeps)
    log_close = path[:, :, -1]
    log_open = np.concatenate((day_open[:, None], log_close[:, :-1]), axis=1)
    sub = np.exp(path)
    open_ = np.exp(log_open)
    close = np.exp(log_close)
    high = np.maximum(sub.max(axis=2), open_)
    low = np.minimum(sub.min(axis=2), open_)
    vwap = sub.mean(axis=2)
    log_return = np.concatenate(((log_close[:, 0] - log_open[:, 0])[:, None], np.diff(log_close, axis=1)), axis=1)

    # book model
    diff_ret = (log_close - log_open) / sigma
    u = np.linspace(-1.0, 1.0, M)
    seasonal = 1.0 + 0.8 * u ** 2
    v0 = rng.uniform(1.5e4, 4e4)
    volume = (v0 * seasonal[None, :] * np.exp(0.4 * rng.standard_normal((n_days, M)) - 0.08)
              * (1.0 + 0.15 * np.minimum(np.abs(diff_ret), 6.0)) * volu_mult.reshape(n_days, M))
    volume = np.maximum(np.round(volume / 100.0) * 100.0, 100.0)
    size0 = rng.uniform(300.0, 800.0)
    trades = np.maximum(rng.poisson(volume / size0), 1).astype(float)
    rel_spread = rng.uniform(5e-4, 1.2e-3)
    qs = close * rel_spread * np.exp(0.25 * rng.standard_normal((n_days, M))) * np.sqrt(vol_mult.reshape(n_days, M))
    es = qs * rng.uniform(0.5, 1.0, (n_days, M))
    di = np.tanh(0.6 * rng.standard_normal((n_days, M)))
    ti = np.clip(0.3 * np.clip(diff_ret, -3, 3) + 0.35 * rng.standard_normal((n_days, M)), -1.0, 1.0)

    panel = BarPanel(name, list(dates), open_, high, low, close, volume, trades, vwap, qs, es, di, ti,
                     log_return, meta={"sigma": sigma})
    log = []
    for g in sorted(jumps):
        d, i = divmod(g, M)
        log.append(GroundTruthJump(name, d, dates[d], i, jumps[g] * sigma, 1 if jumps[g] > 0 else -1))
    return panel, log


def generate_synthetic_universe(n_stocks: int, n_days: int, jump_spec: JumpSpec | None = None,
                                seed: int = 0, *, template: SessionTemplate | None = None,
                                sigma: float | tuple[float, float] = 0.002,
                                patterns: PrejumpPattern | Mapping[int, PrejumpPattern] | None = None,
                                substeps: int = 10, start_date: dt.date = dt.date(2014, 1, 2),
                                min_days: int = 61) -> SyntheticUniverse:
    """Simulate ``n_stocks`` instruments over ``n_days`` sessions.

    ``sigma`` is the per-interval diffusion volatility (a fixed value or a
    (low, high) range drawn per stock). ``patterns`` assigns a
    :class:`PrejumpPattern` to every stock or to selected stock indices.
    Identical arguments give bit-identical output.
    """
    if n_stocks < 1:
        raise ValueError("n_stocks must be >= 1")
    if n_days < min_days:
        raise ValueError(f"n_days must be >= {min_days} (60 sessions of standardization history plus one)")
    jump_spec = jump_spec or JumpSpec()
    template = template or SessionTemplate()
    M = template.intervals_per_day
    dates = business_dates(n_days, start_date)
    width = len(str(n_stocks - 1))
    panels, jumps, sigmas = [], [], {}
    for s, child in enumerate(np.random.SeedSequence(seed).spawn(n_stocks)):
        rng = np.random.default_rng(child)
        name = f"S{s:0{width}d}"
        sig = rng.uniform(*sigma) if isinstance(sigma, tuple) else float(sigma)
        if isinstance(patterns, PrejumpPattern):
            pat = patterns
        elif patterns is not None:
            pat = patterns.get(s)
        else:
            pat = None
        panel, log = _simulate_stock(rng, name, n_days, M, jump_spec, pat, sig, substeps, dates)
        panels.append(panel)
        jumps.extend(log)
        sigmas[name] = sig
    return SyntheticUniverse(panels, jumps, sigmas)
