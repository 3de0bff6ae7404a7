"""Labeled samples: pre-jump windows, steady days and per-stock medians.

A pre-jump window holds the ``W`` intervals strictly before a jump interval
and may cross into earlier sessions. A steady day has no detected jump in
itself nor within ``G`` sessions on either side. Each stock is then reduced
to two samples: the coordinate-wise median of its pre-jump windows (label
1) and of its randomly rotated steady days (label 0).
"""

from __future__ import annotations

import datetime as dt
import json
import warnings
import zlib
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .attributes import AttributeMatrix
from .market_data import BarPanel

FILTER_KINDS = ("warmup", "price-limit-run", "suspension", "date-range")


@dataclass(frozen=True)
class WindowSpec:
    length: int = 48
    steady_day_gap: int = 5

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("window length must be >= 1")
        if self.steady_day_gap < 0:
            raise ValueError("steady_day_gap must be >= 0")


@dataclass(frozen=True)
class ExclusionFilter:
    """A predicate marking (day, interval) cells that no sample may use.

    Parameters by kind:

    ``warmup``          ``days`` (default 60): the first sessions of the stock.
    ``price-limit-run`` ``limit`` (default 0.10), ``tol`` (default 1e-4): every
                        interval closing at the limit, except the first of each
                        consecutive run.
    ``suspension``      ``dates`` (optional list of ISO dates); sessions with
                        zero total volume also count. The session after each
                        suspended one is excluded too.
    ``date-range``      ``start``, ``end`` (ISO dates, inclusive).
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}; expected one of {FILTER_KINDS}")

    @classmethod
    def make(cls, kind: str, **params) -> "ExclusionFilter":
        return cls(kind, tuple(sorted((k, tuple(v) if isinstance(v, list) else v) for k, v in params.items())))

    def param(self, name, default=None):
        return dict(self.params).get(name, default)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **{k: list(v) if isinstance(v, tuple) else v for k, v in self.params}}

    @classmethod
    def from_dict(cls, d: dict) -> "ExclusionFilter":
        d = dict(d)
        return cls.make(d.pop("kind"), **d)

    def mask(self, panel: BarPanel) -> np.ndarray:
        D, M = panel.close.shape
        out = np.zeros((D, M), dtype=bool)
        if self.kind == "warmup":
            out[: int(self.param("days", 60))] = True
        elif self.kind == "price-limit-run":
            limit, tol = float(self.param("limit", 0.10)), float(self.param("tol", 1e-4))
            prev_close = np.concatenate(([np.nan], panel.close[:-1, -1]))
            with np.errstate(invalid="ignore"):
                at_limit = (np.abs(panel.close / prev_close[:, None] - 1.0) >= limit - tol).ravel()
            run = at_limit.copy()
            run[1:] &= at_limit[:-1]          # keep the first interval of each run
            out = run.reshape(D, M)
        elif self.kind == "suspension":
            listed = {str(d) for d in self.param("dates", ())}
            sus = np.array([str(d) in listed for d in panel.dates]) | (panel.volume.sum(axis=1) == 0)
            sus[1:] |= sus[:-1]
            out[sus] = True
        else:
            start = dt.date.fromisoformat(str(self.param("start")))
            end = dt.date.fromisoformat(str(self.param("end")))
            days = np.array([start <= _as_date(d) <= end for d in panel.dates])
            out[days] = True
        return out


def _as_date(d):
    return d if isinstance(d, dt.date) else dt.date.fromisoformat(str(d))


def china_preset(warmup_days: int = 60) -> list[ExclusionFilter]:
    """Filters for the Chinese A-share market: 10% price limit and the circuit-breaker week."""
    return [
        ExclusionFilter.make("warmup", days=warmup_days),
        ExclusionFilter.make("price-limit-run", limit=0.10),
        ExclusionFilter.make("suspension"),
        ExclusionFilter.make("date-range", start="2016-01-04", end="2016-01-08"),
    ]


def default_filters(warmup_days: int = 60) -> list[ExclusionFilter]:
    return [ExclusionFilter.make("warmup", days=warmup_days), ExclusionFilter.make("suspension")]


PRESETS = {"china": china_preset, "default": default_filters}


def filter_masks(panel: BarPanel, filters) -> list[tuple[str, np.ndarray]]:
    return [(f.kind, f.mask(panel).ravel()) for f in filters]


@dataclass
class ExclusionLedger:
    """Counts of dropped windows and days per (instrument, group, reason)."""

    counts: Counter = field(default_factory=Counter)

    def add(self, instrument: str, group: str, reason: str, n: int = 1) -> None:
        self.counts[(instrument, group, reason)] += n

    def total(self, reason: str | None = None) -> int:
        return sum(v for (_, _, r), v in self.counts.items() if reason is None or r == reason)

    def to_frame(self) -> pd.DataFrame:
        rows = sorted((i, g, r, n) for (i, g, r), n in self.counts.items())
        return pd.DataFrame(rows, columns=["instrument", "group", "reason", "count"])

    def merge(self, other: "ExclusionLedger") -> None:
        self.counts.update(other.counts)


def _first_hit(masks, cells: np.ndarray) -> str | None:
    for kind, m in masks:
        if m[cells].any():
            return kind
    return None


def impute_missing(matrix: AttributeMatrix) -> AttributeMatrix:
    """Replace NaNs by the median of the same attribute over the same session (0 if the whole session is NaN)."""
    v = matrix.values.copy()
    bad = np.isnan(v)
    if bad.any():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            med = np.nanmedian(v, axis=2, keepdims=True)
        med = np.nan_to_num(med, nan=0.0)
        v = np.where(bad, np.broadcast_to(med, v.shape), v)
    return AttributeMatrix(matrix.instrument, list(matrix.dates), matrix.ids, v, matrix.methods)


def extract_prejump_windows(events, matrix: AttributeMatrix, spec: WindowSpec = WindowSpec(),
                            masks=(), ledger: ExclusionLedger | None = None) -> list[np.ndarray]:
    """(A, W) windows ending just before each jump interval.

    A window is dropped when it starts before the first interval or when any
    of its cells, or the jump interval itself, is excluded by a filter mask.
    """
    A, D, M = matrix.values.shape
    flat = matrix.values.reshape(A, D * M)
    W = spec.length
    out = []
    for e in events:
        g = e.day_index * M + e.interval_index
        if g - W < 0:
            if ledger is not None:
                ledger.add(matrix.instrument, "prejump", "insufficient-history")
            continue
        reason = _first_hit(masks, np.arange(g - W, g + 1))
        if reason is not None:
            if ledger is not None:
                ledger.add(matrix.instrument, "prejump", reason)
            continue
        out.append(flat[:, g - W:g].copy())
    return out


def steady_days(jump_days, n_days: int, gap: int) -> np.ndarray:
    """Boolean mask of sessions with no jump within ``gap`` sessions on either side."""
    hit = np.zeros(n_days + 2 * gap, dtype=bool)
    for d in set(int(d) for d in jump_days):
        hit[d: d + 2 * gap + 1] = True
    return ~hit[gap: gap + n_days]


def extract_steady_days(events, matrix: AttributeMatrix, spec: WindowSpec = WindowSpec(),
                        masks=(), ledger: ExclusionLedger | None = None) -> list[np.ndarray]:
    """(A, M) full-session series of every qualifying steady day."""
    A, D, M = matrix.values.shape
    ok = steady_days([e.day_index for e in events], D, spec.steady_day_gap)
    out = []
    for d in np.flatnonzero(ok):
        reason = _first_hit(masks, np.arange(d * M, (d + 1) * M))
        if reason is not None:
            if ledger is not None:
                ledger.add(matrix.instrument, "steady", reason)
            continue
        out.append(matrix.values[:, d].copy())
    if not out:
        warnings.warn(f"{matrix.instrument}: no qualifying steady day", RuntimeWarning, stacklevel=2)
    return out


def instrument_rng(seed: int, instrument: str) -> np.random.Generator:
    """Per-instrument stream so the processing order never changes the draws."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(instrument.encode())]))


def virtual_series(days: list[np.ndarray], rng: np.random.Generator) -> np.ndarray:
    """Circularly rotate each day by an independent uniform offset (shared by its attributes)."""
    days = np.stack(days)                              # (n, A, M)
    n, _, M = days.shape
    shifts = rng.integers(0, M, size=n)
    idx = (np.arange(M)[None, :] + shifts[:, None]) % M
    return np.take_along_axis(days, idx[:, None, :], axis=2)


def coordinate_median(windows) -> np.ndarray:
    """Median at every coordinate; an even count takes the midpoint of the two central values."""
    return np.median(np.stack(list(windows)), axis=0)


@dataclass
class LabeledSample:
    instrument_id: str
    label: int
    attribute_ids: tuple[str, ...]
    series: np.ndarray                 # (n_attributes, W)
    n_windows: int = 0

    def __post_init__(self):
        if self.series.shape[0] != len(self.attribute_ids):
            raise ValueError("one series per attribute required")

    def get(self, attribute_id: str) -> np.ndarray:
        return self.series[self.attribute_ids.index(attribute_id)]


def represent_stock(instrument: str, prejump, steady, attribute_ids, window: int, seed: int = 0):
    """Label-1 and label-0 median bundles of one stock; ``None`` for an empty group.

    Steady days are rotated, then their last ``window`` coordinates kept.
    """
    pos = None
    if len(prejump):
        pos = LabeledSample(instrument, 1, tuple(attribute_ids), coordinate_median(prejump), len(prejump))
    neg = None
    if len(steady):
        if window > steady[0].shape[1]:
            raise ValueError(f"window {window} longer than a session ({steady[0].shape[1]} intervals)")
        virt = virtual_series(steady, instrument_rng(seed, instrument))[:, :, -window:]
        neg = LabeledSample(instrument, 0, tuple(attribute_ids), coordinate_median(virt), len(steady))
    return pos, neg


@dataclass
class SampleSet:
    """Per-stock samples of all instruments that have both groups."""

    attribute_ids: tuple[str, ...]
    samples: list[LabeledSample]
    ledger: ExclusionLedger = field(default_factory=ExclusionLedger)
    dropped: list[str] = field(default_factory=list)

    @property
    def instruments(self) -> list[str]:
        return sorted({s.instrument_id for s in self.samples})

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(n_samples, n_attributes, W) values and labels, positives first."""
        order = sorted(self.samples, key=lambda s: (-s.label, s.instrument_id))
        return np.stack([s.series for s in order]), np.array([s.label for s in order])

    def positives(self) -> dict[str, LabeledSample]:
        return {s.instrument_id: s for s in self.samples if s.label == 1}

    def to_json(self, path) -> None:
        payload = {
            "attribute_ids": list(self.attribute_ids),
            "dropped_instruments": self.dropped,
            "samples": [
                {"instrument": s.instrument_id, "label": s.label, "n_windows": s.n_windows,
                 "series": {a: [float(x) for x in s.series[i]] for i, a in enumerate(s.attribute_ids)}}
                for s in sorted(self.samples, key=lambda s: (s.instrument_id, -s.label))
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"), allow_nan=False)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "SampleSet":
        with open(path) as fh:
            payload = json.load(fh)
        ids = tuple(payload["attribute_ids"])
        samples = [LabeledSample(s["instrument"], int(s["label"]), ids,
                                 np.array([s["series"][a] for a in ids], dtype=float), int(s["n_windows"]))
                   for s in payload["samples"]]
        return cls(ids, samples, dropped=list(payload.get("dropped_instruments", [])))


def build_samples(matrices, events_by_instrument, panels=None, spec: WindowSpec = WindowSpec(),
                  filters=None, seed: int = 0) -> SampleSet:
    """Samples for every instrument; stocks missing either group are dropped.

    ``matrices`` are standardized attribute matrices; ``panels`` (same order)
    are needed by the filter masks. ``filters`` defaults to the warm-up and
    suspension filters.
    """
    filters = default_filters() if filters is None else list(filters)
    ledger = ExclusionLedger()
    samples, dropped, ids = [], [], None
    panels = list(panels) if panels is not None else [None] * len(matrices)
    for matrix, panel in zip(matrices, panels):
        ids = ids or matrix.ids
        if matrix.ids != ids:
            raise ValueError("all instruments must carry the same attributes")
        if filters and panel is None:
            raise ValueError("exclusion filters need the bar panels")
        masks = filter_masks(panel, filters) if filters else []
        events = events_by_instrument.get(matrix.instrument, [])
        m = impute_missing(matrix)
        pre = extract_prejump_windows(events, m, spec, masks, ledger)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            st = extract_steady_days(events, m, spec, masks, ledger)
        pos, neg = represent_stock(matrix.instrument, pre, st, m.ids, spec.length, seed)
        if pos is None or neg is None:
            missing = "pre-jump" if pos is None else "steady"
            warnings.warn(f"{matrix.instrument}: no {missing} samples, instrument dropped", RuntimeWarning,
                          stacklevel=2)
            dropped.append(matrix.instrument)
            continue
        samples.extend([pos, neg])
    return SampleSet(tuple(ids or ()), samples, ledger, dropped)
