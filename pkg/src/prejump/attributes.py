"""Candidate attribute series computed per 5-minute interval.

Ten liquidity measures are taken from the bars of the interval itself; the
thirty technical indicators are computed at each interval close from the
continuous close/volume history (lagged indicators look back across session
boundaries, cumulative ones restart at every session open).

Pinned indicator conventions, with ``P`` the close, ``q`` the lag:

=========  ==============================================================
PROC(q)    (P_t - P_{t-q}) / P_{t-q}
VROC(q)    (V_t - V_{t-q}) / V_{t-q}  (missing when V_{t-q} = 0)
MA(q)      mean of the last q closes
EMA(q)     EMA with smoothing 2/(q+1), seeded at the first close
BIAS(q)    (P_t - MA(q)) / MA(q); EBIAS uses EMA(q)
OSCP(q)    (MA(q) - MA(2q)) / MA(q); EOSCP uses EMA(q) and EMA(2q)
fK(q)      100 (P_t - L_q) / (H_q - L_q) over the last q closes; 50 if flat
fD(q)      3-interval mean of fK(q); sD(q) is the 3-interval mean of fD(q)
CCI(q)     (TP - MA_q(TP)) / (0.015 * mean abs deviation), TP = (H+L+C)/3
ADO        100 ((H - O) + (C - L)) / (2 (H - L)); 50 for a flat bar
TR         max(H, P_{t-1}) - min(L, P_{t-1})
PVT, OBV   session-cumulative volume x return, volume x sign of change
NVI, PVI   session indices starting at 1, updated on falling/rising volume
=========  ==============================================================

``RV`` is the Parkinson high-low volatility of the interval and ``R`` the
log return accumulated since the session open.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter

from .market_data import BarPanel

LAGS = (5, 20)
LIQUIDITY = ("r", "V", "K", "S", "TI", "DI", "QS", "ES", "RV", "R")
_LAGGED = ("PROC", "VROC", "MA", "EMA", "BIAS", "EBIAS", "OSCP", "EOSCP")
_LAGGED_TAIL = ("fK", "fD", "sD", "CCI")
TECHNICAL = (
    tuple(f"{n}({q})" for n in _LAGGED for q in LAGS)
    + ("ADO", "TR")
    + tuple(f"{n}({q})" for n in _LAGGED_TAIL for q in LAGS)
    + ("PVT", "OBV", "NVI", "PVI")
)
ATTRIBUTE_IDS: tuple[str, ...] = LIQUIDITY + TECHNICAL

# same-interval median of the previous sessions: divide-and-subtract-1 (A) or subtract (B)
DIVIDE_MEDIAN = ("V", "K", "S", "MA", "EMA", "TR", "PVT", "OBV")
SUBTRACT_MEDIAN = ("TI", "DI", "QS", "ES", "RV", "VROC", "NVI", "PVI")
BASELINE_SESSIONS = 60


def base_name(attribute_id: str) -> str:
    return attribute_id.split("(")[0]


def standardization_method(attribute_id: str) -> str:
    b = base_name(attribute_id)
    if b in DIVIDE_MEDIAN:
        return "divide-median"
    if b in SUBTRACT_MEDIAN:
        return "subtract-median"
    return "none"


def parse_lag(attribute_id: str) -> int | None:
    if "(" not in attribute_id:
        return None
    return int(attribute_id[attribute_id.index("(") + 1:-1])


# --- helpers on a flat, continuous series --------------------------------


def _lagged(x: np.ndarray, q: int) -> np.ndarray:
    out = np.full_like(x, np.nan)
    out[q:] = x[:-q]
    return out


def _sma(x: np.ndarray, q: int) -> np.ndarray:
    out = np.full_like(x, np.nan)
    if x.size >= q:
        out[q - 1:] = sliding_window_view(x, q).mean(axis=1)
    return out


def ema(x: np.ndarray, q: int) -> np.ndarray:
    """EMA with smoothing 2/(q+1); ``ema[0] = x[0]``."""
    x = np.asarray(x, dtype=float)
    a = 2.0 / (q + 1.0)
    y, _ = lfilter([a], [1.0, -(1.0 - a)], x, zi=[(1.0 - a) * x[0]])
    return y


def _available_from(x: np.ndarray, first: int) -> np.ndarray:
    x = x.copy()
    x[:first] = np.nan
    return x


def _stochastic_k(p: np.ndarray, q: int) -> np.ndarray:
    out = np.full_like(p, np.nan)
    if p.size >= q:
        win = sliding_window_view(p, q)
        hi, lo = win.max(axis=1), win.min(axis=1)
        rng = hi - lo
        with np.errstate(invalid="ignore", divide="ignore"):
            k = np.where(rng > 0, 100.0 * (p[q - 1:] - lo) / rng, 50.0)
        out[q - 1:] = k
    return out


def _cci(tp: np.ndarray, q: int) -> np.ndarray:
    out = np.full_like(tp, np.nan)
    if tp.size >= q:
        win = sliding_window_view(tp, q)
        m = win.mean(axis=1)
        mad = np.abs(win - m[:, None]).mean(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[q - 1:] = np.where(mad > 0, (tp[q - 1:] - m) / (0.015 * mad), 0.0)
    return out


def _session_returns(panel: BarPanel) -> np.ndarray:
    """Simple return of each close over the previous close of the same session (open for interval 0)."""
    c = panel.close
    prev = np.concatenate((panel.open[:, :1], c[:, :-1]), axis=1)
    return c / prev - 1.0, prev


# --- public computations --------------------------------------------------


def compute_liquidity(panel: BarPanel) -> dict[str, np.ndarray]:
    """The ten liquidity measures, each shaped (n_days, M)."""
    V = panel.volume.astype(float)
    K = panel.trades.astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        S = np.where(K > 0, V / np.where(K > 0, K, 1.0), 0.0)
        hl = np.log(panel.high / panel.low)
    rv = np.abs(hl) / (2.0 * np.sqrt(np.log(2.0)))
    return {
        "r": panel.log_return.astype(float),
        "V": V,
        "K": K,
        "S": S,
        "TI": panel.ti.astype(float),
        "DI": panel.di.astype(float),
        "QS": panel.qs.astype(float),
        "ES": panel.es.astype(float),
        "RV": rv,
        "R": np.cumsum(panel.log_return, axis=1),
    }


def compute_technical(attribute_id: str, panel: BarPanel) -> np.ndarray:
    """One technical indicator, shaped (n_days, M), causal in time.

    Values that need more history than is available are NaN.
    """
    shape = panel.close.shape
    p = panel.close.ravel().astype(float)
    v = panel.volume.ravel().astype(float)
    h = panel.high.ravel().astype(float)
    lo = panel.low.ravel().astype(float)
    o = panel.open.ravel().astype(float)
    name, q = base_name(attribute_id), parse_lag(attribute_id)
    if (q is None) != (name in ("ADO", "TR", "PVT", "OBV", "NVI", "PVI")):
        raise ValueError(f"unknown attribute {attribute_id!r}")

    with np.errstate(invalid="ignore", divide="ignore"):
        if name == "PROC":
            out = p / _lagged(p, q) - 1.0
        elif name == "VROC":
            base = _lagged(v, q)
            out = np.where(base > 0, (v - base) / np.where(base > 0, base, 1.0), np.nan)
            out[:q] = np.nan
        elif name == "MA":
            out = _sma(p, q)
        elif name == "EMA":
            out = _available_from(ema(p, q), q - 1)
        elif name == "BIAS":
            m = _sma(p, q)
            out = (p - m) / m
        elif name == "EBIAS":
            e = _available_from(ema(p, q), q - 1)
            out = (p - e) / e
        elif name == "OSCP":
            short = _sma(p, q)
            out = (short - _sma(p, 2 * q)) / short
        elif name == "EOSCP":
            short = ema(p, q)
            out = _available_from((short - ema(p, 2 * q)) / short, 2 * q - 1)
        elif name == "fK":
            out = _stochastic_k(p, q)
        elif name == "fD":
            out = _sma(_stochastic_k(p, q), 3)
        elif name == "sD":
            out = _sma(_sma(_stochastic_k(p, q), 3), 3)
        elif name == "CCI":
            out = _cci((h + lo + p) / 3.0, q)
        elif name == "ADO":
            r = h - lo
            out = np.where(r > 0, 100.0 * ((h - o) + (p - lo)) / (2.0 * np.where(r > 0, r, 1.0)), 50.0)
        elif name == "TR":
            prev = np.concatenate(([p[0]], p[:-1]))
            out = np.maximum(h, prev) - np.minimum(lo, prev)
            out[0] = h[0] - lo[0]
        else:
            ret, prev = _session_returns(panel)
            V = panel.volume.astype(float)
            if name == "PVT":
                return np.cumsum(V * ret, axis=1)
            if name == "OBV":
                return np.cumsum(np.sign(panel.close - prev) * V, axis=1)
            dV = np.diff(V, axis=1)
            up = dV > 0 if name == "PVI" else dV < 0
            growth = np.where(up, 1.0 + ret[:, 1:], 1.0)
            return np.concatenate((np.ones((shape[0], 1)), np.cumprod(growth, axis=1)), axis=1)
    return out.reshape(shape)


@dataclass
class AttributeMatrix:
    """Attribute values of one instrument: ``values[a, day, interval]``."""

    instrument: str
    dates: list
    ids: tuple[str, ...]
    values: np.ndarray
    methods: tuple[str, ...]

    @property
    def standardized(self) -> bool:
        return any(m != "none" for m in self.methods)

    def index(self, attribute_id: str) -> int:
        return self.ids.index(attribute_id)

    def series(self, attribute_id: str, day: int) -> "AttributeSeries":
        a = self.index(attribute_id)
        return AttributeSeries(attribute_id, self.instrument, self.dates[day], self.values[a, day].copy(),
                               self.methods[a] != "none", self.methods[a])

    def to_frame(self) -> pd.DataFrame:
        A, D, M = self.values.shape
        return pd.DataFrame({
            "instrument": self.instrument,
            "date": np.tile(np.repeat([str(d) for d in self.dates], M), A),
            "interval": np.tile(np.arange(M), A * D),
            "attribute": np.repeat(self.ids, D * M),
            "value": self.values.ravel(),
            "standardized_method": np.repeat(self.methods, D * M),
        })

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "AttributeMatrix":
        if df["instrument"].nunique() != 1:
            raise ValueError("attribute table must hold exactly one instrument")
        ids = tuple(pd.unique(df["attribute"]))
        dates = [str(d) for d in pd.unique(df["date"])]
        M = int(df["interval"].max()) + 1
        if len(df) != len(ids) * len(dates) * M:
            raise ValueError("incomplete attribute table")
        df = df.set_index(["attribute", "date", "interval"]).sort_index()
        values = np.stack([df.loc[a, "value"].to_numpy(dtype=float).reshape(len(dates), M) for a in ids])
        sorted_dates = sorted(dates)
        methods = tuple(str(df.loc[a, "standardized_method"].iloc[0]) for a in ids)
        import datetime as dt
        return cls(str(df["instrument"].iloc[0]), [dt.date.fromisoformat(d) for d in sorted_dates], ids,
                   values, methods)


@dataclass
class AttributeSeries:
    attribute_id: str
    instrument_id: str
    session_date: object
    values: np.ndarray
    standardized: bool
    method: str


def compute_attributes(panel: BarPanel) -> AttributeMatrix:
    """All 40 raw attribute series of one instrument."""
    liq = compute_liquidity(panel)
    vals = [liq[a] for a in LIQUIDITY] + [compute_technical(a, panel) for a in TECHNICAL]
    return AttributeMatrix(panel.instrument, list(panel.dates), ATTRIBUTE_IDS, np.stack(vals),
                           tuple("none" for _ in ATTRIBUTE_IDS))


def rolling_median_baseline(values: np.ndarray, history: int = BASELINE_SESSIONS) -> np.ndarray:
    """Same-interval median over the previous ``history`` sessions.

    ``values`` is (n_days, M); rows with too little history are NaN.
    """
    values = np.asarray(values, dtype=float)
    D, M = values.shape
    out = np.full((D, M), np.nan)
    if D > history:
        win = sliding_window_view(values[:-1], history, axis=0)      # (D - history, M, history)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            out[history:] = np.nanmedian(win, axis=2)
    return out


def apply_standardization(values, baseline, method: str) -> np.ndarray:
    """Standardize against a baseline median.

    ``divide-median`` gives ``x / m - 1`` (missing where ``m = 0``);
    ``subtract-median`` gives ``x - m``; ``none`` returns the values.
    """
    x = np.asarray(values, dtype=float)
    m = np.asarray(baseline, dtype=float)
    if method == "divide-median":
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(m != 0, x / np.where(m != 0, m, 1.0) - 1.0, np.nan)
    if method == "subtract-median":
        return x - m
    if method == "none":
        return x.copy()
    raise ValueError(f"unknown standardization method {method!r}")


def standardize(matrix: AttributeMatrix, history: int = BASELINE_SESSIONS) -> AttributeMatrix:
    """Apply each attribute's standardization; sessions without history become NaN."""
    out = np.empty_like(matrix.values)
    methods = []
    for a, aid in enumerate(matrix.ids):
        method = standardization_method(aid)
        methods.append(method)
        if method == "none":
            out[a] = matrix.values[a]
        else:
            out[a] = apply_standardization(matrix.values[a], rolling_median_baseline(matrix.values[a], history), method)
    return AttributeMatrix(matrix.instrument, list(matrix.dates), matrix.ids, out, tuple(methods))


def write_attribute_csv(matrices, path) -> None:
    """Long-format attribute table for one or more instruments."""
    first = True
    with open(path, "w", newline="") as fh:
        for m in matrices:
            m.to_frame().to_csv(fh, index=False, header=first, float_format="%.17g")
            first = False


def read_attribute_csv(path) -> list[AttributeMatrix]:
    df = pd.read_csv(path, dtype={"instrument": str, "date": str}, float_precision="round_trip")
    return [AttributeMatrix.from_frame(g) for _, g in df.groupby("instrument", sort=True)]
