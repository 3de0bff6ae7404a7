"""Quote/trade records, session templates and fixed-interval bars.

Bars are held per instrument in a :class:`BarPanel`, a set of
``(n_days, intervals_per_day)`` arrays, which is what every downstream stage
consumes. :func:`resample_to_bars` builds bars from a level-2 style record
stream; :mod:`prejump.synthetic` builds panels directly.

Conventions for resampled bars:

* empty intervals carry the last close forward with zero volume and trades;
* ``log_return`` of interval 0 is ``ln(close_0 / open_0)``, so no bar return
  spans the overnight gap; later intervals use ``ln(close_i / close_{i-1})``;
* quoted spread, depth imbalance and effective spread are time-weighted
  averages of the prevailing snapshot over the interval; VWAP is volume
  weighted (the last close when nothing traded).
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

N_LEVELS = 10
BAR_FIELDS = ("open", "high", "low", "close", "volume", "trades", "vwap", "qs", "es", "di", "ti", "log_return")
BAR_CSV_COLUMNS = ["instrument", "date", "interval", "open", "high", "low", "close", "volume", "trades",
                   "vwap", "qs", "es", "di", "ti", "logret"]
RECORD_CSV_COLUMNS = (["timestamp", "price", "volume", "trade_count"]
                      + [f"bid{i}" for i in range(1, N_LEVELS + 1)]
                      + [f"ask{i}" for i in range(1, N_LEVELS + 1)]
                      + [f"bidsz{i}" for i in range(1, N_LEVELS + 1)]
                      + [f"asksz{i}" for i in range(1, N_LEVELS + 1)])


class RecordOrderError(ValueError):
    """Raised when a record stream is not sorted by timestamp."""

    def __init__(self, index: int):
        super().__init__(f"record {index} is earlier than its predecessor")
        self.index = index


def _parse_clock(s: str) -> dt.time:
    return dt.time.fromisoformat(s)


def _minutes(t: dt.time) -> float:
    return t.hour * 60 + t.minute + t.second / 60


@dataclass(frozen=True)
class SessionTemplate:
    """Trading-session layout: clock windows split into equal intervals."""

    windows: tuple[tuple[str, str], ...] = (("09:30", "11:30"), ("13:00", "15:00"))
    interval_minutes: int = 5
    intervals_per_day: int = 48

    def __post_init__(self):
        if self.interval_minutes <= 0 or self.intervals_per_day <= 0:
            raise ValueError("interval_minutes and intervals_per_day must be positive")
        total = 0.0
        last_close = -1.0
        for open_, close in self.windows:
            a, b = _minutes(_parse_clock(open_)), _minutes(_parse_clock(close))
            if b <= a or a < last_close:
                raise ValueError(f"invalid or overlapping session window {open_}-{close}")
            if (b - a) % self.interval_minutes:
                raise ValueError(f"window {open_}-{close} is not a whole number of intervals")
            total += b - a
            last_close = b
        if total != self.intervals_per_day * self.interval_minutes:
            raise ValueError(f"session windows cover {total:g} minutes but "
                             f"{self.intervals_per_day} x {self.interval_minutes} = "
                             f"{self.intervals_per_day * self.interval_minutes} were declared")

    def interval_bounds(self) -> list[tuple[float, float]]:
        """(start, end) of every interval in minutes after midnight."""
        out = []
        for open_, close in self.windows:
            a, b = _minutes(_parse_clock(open_)), _minutes(_parse_clock(close))
            for s in np.arange(a, b, self.interval_minutes):
                out.append((float(s), float(s + self.interval_minutes)))
        return out

    def interval_of(self, t: dt.time) -> int | None:
        """Interval index of a clock time, or None outside every window.

        Intervals are half-open ``[start, end)`` except that a window's
        closing instant belongs to its last interval.
        """
        m = _minutes(t)
        offset = 0
        for open_, close in self.windows:
            a, b = _minutes(_parse_clock(open_)), _minutes(_parse_clock(close))
            n = int((b - a) // self.interval_minutes)
            if a <= m <= b:
                return offset + min(int((m - a) // self.interval_minutes), n - 1)
            offset += n
        return None

    def to_dict(self) -> dict:
        return {"windows": [list(w) for w in self.windows], "interval_minutes": self.interval_minutes,
                "intervals_per_day": self.intervals_per_day}

    @classmethod
    def from_dict(cls, d: dict) -> "SessionTemplate":
        unknown = set(d) - {"windows", "interval_minutes", "intervals_per_day"}
        if unknown:
            raise ValueError(f"unknown session template keys: {sorted(unknown)}")
        kw = {}
        if "windows" in d:
            kw["windows"] = tuple(tuple(w) for w in d["windows"])
        if "interval_minutes" in d:
            kw["interval_minutes"] = int(d["interval_minutes"])
        if "intervals_per_day" in d:
            kw["intervals_per_day"] = int(d["intervals_per_day"])
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "SessionTemplate":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class QuoteTradeRecord:
    timestamp: dt.datetime
    price: float
    volume: float = 0.0
    trade_count: int = 0
    bid_prices: tuple[float, ...] = ()
    ask_prices: tuple[float, ...] = ()
    bid_sizes: tuple[float, ...] = ()
    ask_sizes: tuple[float, ...] = ()

    def __post_init__(self):
        if self.volume < 0 or self.trade_count < 0:
            raise ValueError("volume and trade_count must be non-negative")
        if self.volume == 0 and self.trade_count != 0:
            raise ValueError("a record with zero volume cannot carry trades")
        if len(self.bid_prices) != len(self.bid_sizes) or len(self.ask_prices) != len(self.ask_sizes):
            raise ValueError("each quote level needs both a price and a size")
        if any(a < b for a, b in zip(self.bid_prices, self.bid_prices[1:])):
            raise ValueError("bid levels must be sorted descending")
        if any(a > b for a, b in zip(self.ask_prices, self.ask_prices[1:])):
            raise ValueError("ask levels must be sorted ascending")
        if self.bid_prices and self.ask_prices and self.ask_prices[0] < self.bid_prices[0]:
            raise ValueError("crossed quote: best ask below best bid")

    @property
    def mid(self) -> float | None:
        if self.bid_prices and self.ask_prices:
            return 0.5 * (self.bid_prices[0] + self.ask_prices[0])
        return None


@dataclass(frozen=True)
class Bar:
    instrument_id: str
    session_date: dt.date
    interval_index: int
    open: float
    high: float
    low: float
    close: float
    volume: float
    trade_count: int
    vwap: float
    avg_quoted_spread: float
    avg_effective_spread: float
    avg_depth_imbalance: float
    trade_imbalance: float
    log_return: float


@dataclass
class BarPanel:
    """All bars of one instrument as ``(n_days, M)`` arrays."""

    instrument: str
    dates: list[dt.date]
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray
    trades: np.ndarray
    vwap: np.ndarray
    qs: np.ndarray
    es: np.ndarray
    di: np.ndarray
    ti: np.ndarray
    log_return: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_days(self) -> int:
        return self.close.shape[0]

    @property
    def intervals_per_day(self) -> int:
        return self.close.shape[1]

    def with_returns(self, log_return: np.ndarray) -> "BarPanel":
        kw = {f: getattr(self, f) for f in BAR_FIELDS}
        kw["log_return"] = np.asarray(log_return, dtype=float)
        return BarPanel(self.instrument, list(self.dates), meta=dict(self.meta), **kw)

    def to_bars(self) -> list[Bar]:
        out = []
        for d, date in enumerate(self.dates):
            for i in range(self.intervals_per_day):
                out.append(Bar(self.instrument, date, i, float(self.open[d, i]), float(self.high[d, i]),
                               float(self.low[d, i]), float(self.close[d, i]), float(self.volume[d, i]),
                               int(self.trades[d, i]), float(self.vwap[d, i]), float(self.qs[d, i]),
                               float(self.es[d, i]), float(self.di[d, i]), float(self.ti[d, i]),
                               float(self.log_return[d, i])))
        return out

    @classmethod
    def from_bars(cls, bars: Sequence[Bar], intervals_per_day: int) -> "BarPanel":
        if not bars:
            raise ValueError("no bars")
        instrument = bars[0].instrument_id
        dates = sorted({b.session_date for b in bars})
        row = {d: i for i, d in enumerate(dates)}
        arrays = {f: np.full((len(dates), intervals_per_day), np.nan) for f in BAR_FIELDS}
        attr = {"open": "open", "high": "high", "low": "low", "close": "close", "volume": "volume",
                "trades": "trade_count", "vwap": "vwap", "qs": "avg_quoted_spread",
                "es": "avg_effective_spread", "di": "avg_depth_imbalance", "ti": "trade_imbalance",
                "log_return": "log_return"}
        for b in bars:
            if b.instrument_id != instrument:
                raise ValueError("bars from more than one instrument")
            for f, a in attr.items():
                arrays[f][row[b.session_date], b.interval_index] = getattr(b, a)
        if np.isnan(arrays["close"]).any():
            raise ValueError("incomplete sessions: every session needs all intervals")
        return cls(instrument, dates, **arrays)

    def to_frame(self) -> pd.DataFrame:
        D, M = self.close.shape
        df = pd.DataFrame({
            "instrument": self.instrument,
            "date": np.repeat([d.isoformat() for d in self.dates], M),
            "interval": np.tile(np.arange(M), D),
        })
        for col, f in zip(BAR_CSV_COLUMNS[3:], BAR_FIELDS):
            df[col] = getattr(self, f).ravel()
        df["trades"] = df["trades"].astype(np.int64)
        return df

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "BarPanel":
        missing = [c for c in BAR_CSV_COLUMNS if c not in df.columns]
        if missing:
            raise ValueError(f"bar table lacks columns {missing}")
        if df["instrument"].nunique() != 1:
            raise ValueError("bar table must hold exactly one instrument")
        df = df.sort_values(["date", "interval"], kind="stable")
        dates = [dt.date.fromisoformat(str(s)) for s in pd.unique(df["date"])]
        M = int(df["interval"].max()) + 1
        if len(df) != len(dates) * M:
            raise ValueError("incomplete sessions in bar table")
        arrays = {f: df[c].to_numpy(dtype=float).reshape(len(dates), M)
                  for c, f in zip(BAR_CSV_COLUMNS[3:], BAR_FIELDS)}
        return cls(str(df["instrument"].iloc[0]), dates, **arrays)


def write_bars_csv(panel: BarPanel, path) -> None:
    panel.to_frame().to_csv(path, index=False, float_format="%.17g")


def read_bars_csv(path) -> BarPanel:
    return BarPanel.from_frame(pd.read_csv(path, dtype={"instrument": str}, float_precision="round_trip"))


def read_records_csv(path) -> list[QuoteTradeRecord]:
    """Read one instrument's record file (header as in ``RECORD_CSV_COLUMNS``)."""
    df = pd.read_csv(path)
    missing = [c for c in RECORD_CSV_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"record file lacks columns {missing}")
    out = []
    for row in df.itertuples(index=False):
        r = row._asdict()

        def levels(prefix):
            vals = [r[f"{prefix}{i}"] for i in range(1, N_LEVELS + 1)]
            return tuple(float(v) for v in vals if not pd.isna(v))

        bids, asks = levels("bid"), levels("ask")
        out.append(QuoteTradeRecord(
            timestamp=pd.Timestamp(r["timestamp"]).to_pydatetime(),
            price=float(r["price"]), volume=float(r["volume"]), trade_count=int(r["trade_count"]),
            bid_prices=bids, ask_prices=asks,
            bid_sizes=levels("bidsz")[:len(bids)], ask_sizes=levels("asksz")[:len(asks)],
        ))
    return out


@dataclass
class ResampleResult:
    bars: list[Bar]
    skipped: int


def _tw_mean(times: np.ndarray, values: np.ndarray, start: float, end: float, prior: float) -> float:
    """Time-weighted mean over [start, end) of a step function.

    ``values[i]`` holds from ``times[i]``; before the first change the
    function equals ``prior``. NaN pieces are ignored; all-NaN gives NaN.
    """
    knots = np.concatenate(([start], times, [end]))
    vals = np.concatenate(([prior], values))
    w = np.diff(knots)
    ok = ~np.isnan(vals) & (w > 0)
    if not ok.any():
        good = vals[~np.isnan(vals)]
        return float(good[-1]) if good.size else float("nan")
    return float(np.sum(vals[ok] * w[ok]) / np.sum(w[ok]))


def resample_to_bars(records: Iterable[QuoteTradeRecord], template: SessionTemplate,
                     instrument_id: str = "") -> ResampleResult:
    """Aggregate one instrument's ordered record stream into fixed-interval bars."""
    records = list(records)
    for i in range(1, len(records)):
        if records[i].timestamp < records[i - 1].timestamp:
            raise RecordOrderError(i)
    M = template.intervals_per_day
    bounds = template.interval_bounds()
    by_day: dict[dt.date, list[tuple[int, QuoteTradeRecord]]] = {}
    skipped = 0
    for rec in records:
        idx = template.interval_of(rec.timestamp.time())
        if idx is None:
            skipped += 1
            continue
        by_day.setdefault(rec.timestamp.date(), []).append((idx, rec))

    bars: list[Bar] = []
    last_close: float | None = None
    qs_state = es_state = di_state = float("nan")
    last_trade: float | None = None
    last_sign = 0.0
    for day in sorted(by_day):
        recs = by_day[day]
        if last_close is None:
            # nothing traded before: back-fill from the session's first trade
            first = next((r.price for _, r in recs if r.volume > 0), recs[0][1].price)
            last_close = first
        prev_close = last_close
        per_interval: dict[int, list[QuoteTradeRecord]] = {}
        for idx, r in recs:
            per_interval.setdefault(idx, []).append(r)
        for i in range(M):
            here = per_interval.get(i, [])
            start, end = bounds[i]
            trades_p = np.array([r.price for r in here if r.volume > 0])
            trades_v = np.array([r.volume for r in here if r.volume > 0])
            if trades_p.size:
                o, h, l, c = trades_p[0], trades_p.max(), trades_p.min(), trades_p[-1]
                vwap = float(np.sum(trades_p * trades_v) / trades_v.sum())
            else:
                o = h = l = c = vwap = last_close
            times = np.array([_minutes(r.timestamp.time()) for r in here])
            qs_v, es_v, di_v = [], [], []
            buy = sell = 0.0
            for r in here:
                mid = r.mid
                if r.volume > 0:
                    if mid is not None and r.price > mid:
                        sgn = 1.0
                    elif mid is not None and r.price < mid:
                        sgn = -1.0
                    elif last_trade is not None and r.price != last_trade:
                        sgn = 1.0 if r.price > last_trade else -1.0
                    else:
                        sgn = last_sign
                    last_sign = sgn
                    if sgn > 0:
                        buy += r.volume
                    elif sgn < 0:
                        sell += r.volume
                    last_trade = r.price
                qs_v.append(r.ask_prices[0] - r.bid_prices[0] if mid is not None else np.nan)
                depth = sum(r.bid_sizes) + sum(r.ask_sizes)
                di_v.append((sum(r.bid_sizes) - sum(r.ask_sizes)) / depth if depth > 0 else np.nan)
                es_v.append(2.0 * abs(last_trade - mid) if (mid is not None and last_trade is not None) else np.nan)
            qs_i = _tw_mean(times, np.array(qs_v), start, end, qs_state)
            di_i = _tw_mean(times, np.array(di_v), start, end, di_state)
            es_i = _tw_mean(times, np.array(es_v), start, end, es_state)
            if here:
                qs_state = qs_v[-1] if not np.isnan(qs_v[-1]) else qs_state
                di_state = di_v[-1] if not np.isnan(di_v[-1]) else di_state
                es_state = es_v[-1] if not np.isnan(es_v[-1]) else es_state
            vol = float(trades_v.sum()) if trades_v.size else 0.0
            ntr = int(sum(r.trade_count for r in here))
            ti = (buy - sell) / vol if vol > 0 else 0.0
            ret = np.log(c / o) if i == 0 else np.log(c / prev_close)
            bars.append(Bar(instrument_id, day, i, float(o), float(h), float(l), float(c), vol, ntr, vwap,
                            qs_i, es_i, di_i, float(ti), float(ret)))
            prev_close = last_close = float(c)
    return ResampleResult(bars, skipped)
