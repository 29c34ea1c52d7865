"""OHLCV ingestion, calendar alignment, portfolio sampling, state windows.

Prices live in a :class:`Panel`: one float array shaped (assets, days, 5)
with columns ``open, high, low, close, volume`` on a shared trading calendar.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

FIELDS = ("open", "high", "low", "close", "volume")
PRICE_FIELDS = FIELDS[:4]
CLOSE = FIELDS.index("close")
VOLUME = FIELDS.index("volume")

# Feature combinations studied for the state, optionally extended with "+volume".
FEATURE_SETS = {
    "close": ("close",),
    "close+high": ("close", "high"),
    "close+open": ("close", "open"),
    "close+low": ("close", "low"),
}


class DataError(ValueError):
    pass


def parse_features(spec) -> tuple[str, ...]:
    """Turn ``"close+high+volume"`` or a sequence of names into a feature tuple."""
    names = spec.split("+") if isinstance(spec, str) else list(spec)
    if not names or names[0] != "close":
        raise DataError(f"feature set must start with 'close', got {names}")
    bad = [n for n in names if n not in FIELDS]
    if bad:
        raise DataError(f"unknown features {bad}; choose from {FIELDS}")
    if len(set(names)) != len(names):
        raise DataError(f"duplicate features in {names}")
    return tuple(names)


@dataclass(frozen=True)
class AssetSeries:
    asset_id: str
    dates: np.ndarray  # datetime64[D], strictly increasing
    values: np.ndarray  # (n, 5) in FIELDS order

    def __post_init__(self):
        if len(self.dates) != len(self.values):
            raise DataError(f"{self.asset_id}: {len(self.dates)} dates but {len(self.values)} rows")
        if len(self.dates) > 1 and np.any(np.diff(self.dates) <= np.timedelta64(0, "D")):
            raise DataError(f"{self.asset_id}: dates must be strictly increasing")
        if np.any(self.values[:, :4] <= 0):
            raise DataError(f"{self.asset_id}: prices must be positive")
        if np.any(self.values[:, VOLUME] < 0):
            raise DataError(f"{self.asset_id}: volume must be non-negative")

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True, eq=False)
class Panel:
    """Aligned multi-asset history.  ``values`` has shape (m, T, 5)."""

    asset_ids: tuple
    calendar: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[2] != len(FIELDS):
            raise DataError(f"panel values must be (assets, days, 5), got {self.values.shape}")
        if self.values.shape[0] != len(self.asset_ids) or self.values.shape[0] < 1:
            raise DataError("panel needs at least one asset and one id per asset")
        if self.values.shape[1] != len(self.calendar):
            raise DataError("calendar length does not match panel length")
        if not np.all(np.isfinite(self.values)):
            raise DataError("panel contains missing or non-finite cells")
        self.values.setflags(write=False)
        self.calendar.setflags(write=False)

    @property
    def n_assets(self) -> int:
        return self.values.shape[0]

    @property
    def n_days(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return self.n_days

    def field(self, name: str) -> np.ndarray:
        """(m, T) view of one OHLCV column."""
        return self.values[:, :, FIELDS.index(name)]

    @property
    def close(self) -> np.ndarray:
        return self.values[:, :, CLOSE]

    def with_values(self, values: np.ndarray) -> "Panel":
        return Panel(self.asset_ids, self.calendar, values)

    def slice(self, start: int, stop: int) -> "Panel":
        return Panel(self.asset_ids, self.calendar[start:stop].copy(), self.values[:, start:stop].copy())

    def index_of(self, date) -> int:
        """Index of the first calendar day on or after ``date``."""
        d = np.datetime64(date, "D")
        return int(np.searchsorted(self.calendar, d, side="left"))

    def to_series(self) -> list[AssetSeries]:
        return [AssetSeries(aid, self.calendar.copy(), self.values[i].copy())
                for i, aid in enumerate(self.asset_ids)]

    def equals(self, other: "Panel") -> bool:
        return (self.asset_ids == other.asset_ids
                and np.array_equal(self.calendar, other.calendar)
                and self.values.tobytes() == other.values.tobytes())


# ingestion ------------------------------------------------------------------

def load_ohlcv(path, asset_id: str | None = None) -> AssetSeries:
    """Read a ``date,open,high,low,close,volume`` CSV; rows come back date-sorted."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"data file not found: {path}")
    asset_id = asset_id or path.stem
    dates, rows, seen = [], [], {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader, [])]
        if header != ["date", *FIELDS]:
            raise DataError(f"{path}:1: expected header date,{','.join(FIELDS)}, got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 6:
                raise DataError(f"{path}:{lineno}: expected 6 columns, got {len(row)}")
            try:
                day = np.datetime64(row[0].strip(), "D")
                vals = [float(c) for c in row[1:]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: malformed row ({exc})") from None
            if not all(np.isfinite(vals)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if min(vals[:4]) <= 0:
                raise DataError(f"{path}:{lineno}: non-positive price")
            if vals[4] < 0:
                raise DataError(f"{path}:{lineno}: negative volume")
            if day in seen:
                raise DataError(f"{path}:{lineno}: duplicate date {day} (first on line {seen[day]})")
            seen[day] = lineno
            dates.append(day)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    dates = np.array(dates, dtype="datetime64[D]")
    order = np.argsort(dates, kind="stable")
    return AssetSeries(asset_id, dates[order], np.array(rows, dtype=np.float64)[order])


def write_ohlcv(path, series: AssetSeries) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *FIELDS])
        for d, row in zip(series.dates, series.values):
            w.writerow([str(d), *(repr(float(v)) for v in row)])


def align_and_fill(series: Sequence[AssetSeries], start=None, end=None) -> Panel:
    """Align series on the union calendar of their common span.

    The span runs from the latest first date to the earliest last date.  A
    day on which an asset did not trade gets open=high=low=close=previous
    close and volume 0.
    """
    if not series:
        raise DataError("align_and_fill needs at least one series")
    empty = [s.asset_id for s in series if len(s) == 0]
    if empty:
        raise DataError(f"series without rows: {empty}")
    lo = max(s.dates[0] for s in series)
    hi = min(s.dates[-1] for s in series)
    if start is not None:
        lo = max(lo, np.datetime64(start, "D"))
    if end is not None:
        hi = min(hi, np.datetime64(end, "D"))
    if lo > hi:
        raise DataError(f"series share no common trading span (latest start {lo}, earliest end {hi})")
    cal = np.unique(np.concatenate([s.dates[(s.dates >= lo) & (s.dates <= hi)] for s in series]))
    out = np.empty((len(series), len(cal), len(FIELDS)))
    for i, s in enumerate(series):
        # latest own row on or before each calendar day; lo is an own date so pos >= 0
        pos = np.searchsorted(s.dates, cal, side="right") - 1
        exact = s.dates[pos] == cal
        rows = s.values[pos]
        prev_close = rows[:, CLOSE]
        filled = np.column_stack([prev_close, prev_close, prev_close, prev_close, np.zeros(len(cal))])
        out[i] = np.where(exact[:, None], rows, filled)
    return Panel(tuple(s.asset_id for s in series), cal, out)


def select_portfolio(pool: Sequence[AssetSeries], m: int = 5, min_days: int = 1200,
                     rng: np.random.Generator | None = None, max_draws: int = 10000) -> Panel:
    """Draw random m-subsets until one has at least ``min_days`` aligned days."""
    if len(pool) < m:
        raise DataError(f"pool has {len(pool)} assets, fewer than m={m}")
    rng = np.random.default_rng(rng)
    for _ in range(max_draws):
        idx = np.sort(rng.choice(len(pool), size=m, replace=False))
        chosen = [pool[i] for i in idx]
        try:
            panel = align_and_fill(chosen)
        except DataError:
            continue
        if panel.n_days >= min_days:
            return panel
    raise DataError(f"no {m}-asset subset with >= {min_days} aligned days after {max_draws} draws")


# state construction ---------------------------------------------------------

def normalize_window(panel: Panel, t: int, window: int, features=("close",)) -> np.ndarray:
    """State for day ``t``: (m, len(features), window) array.

    Prices are divided by the same asset's close on day ``t``; volume by its
    in-window maximum (zero when the window never traded).
    """
    return window_stack(panel, [t], window, features)[0]


def window_stack(panel: Panel, days: Sequence[int], window: int, features=("close",)) -> np.ndarray:
    """Batched :func:`normalize_window`: (len(days), m, F, window)."""
    features = parse_features(features)
    days = np.asarray(days, dtype=int)
    if window < 1:
        raise DataError("window must be positive")
    if days.size and (days.min() < window - 1 or days.max() >= panel.n_days):
        raise DataError(f"state day must lie in [{window - 1}, {panel.n_days - 1}] for window {window}")
    lags = days[:, None] + np.arange(-window + 1, 1)[None, :]  # (n, W)
    cols = [FIELDS.index(f) for f in features]
    raw = panel.values[:, lags][..., cols]  # (m, n, W, F)
    raw = np.moveaxis(raw, 0, 1).transpose(0, 1, 3, 2)  # (n, m, F, W)
    out = np.empty_like(raw)
    last_close = panel.close[:, days].T[:, :, None]  # (n, m, 1)
    for j, f in enumerate(features):
        if f == "volume":
            vmax = raw[:, :, j].max(axis=-1, keepdims=True)
            out[:, :, j] = np.divide(raw[:, :, j], vmax, out=np.zeros_like(raw[:, :, j]), where=vmax > 0)
        else:
            out[:, :, j] = raw[:, :, j] / last_close
    return out


def price_relatives(panel: Panel, t: int) -> np.ndarray:
    """(1, close_1[t]/close_1[t-1], ..., close_m[t]/close_m[t-1])."""
    return relatives_stack(panel, [t])[0]


def relatives_stack(panel: Panel, days: Sequence[int]) -> np.ndarray:
    days = np.asarray(days, dtype=int)
    if days.size and (days.min() < 1 or days.max() >= panel.n_days):
        raise DataError(f"price relatives need 1 <= t < {panel.n_days}")
    ratio = (panel.close[:, days] / panel.close[:, days - 1]).T
    return np.column_stack([np.ones(len(days)), ratio])


# synthetic data -------------------------------------------------------------

def gen_synthetic(drifts: Sequence[float], vols: Sequence[float], days: int,
                  rng: np.random.Generator | int | None = None, s0: float = 100.0,
                  start="2010-01-04", asset_ids: Sequence[str] | None = None) -> Panel:
    """Geometric Brownian motion panel on a business-day calendar.

    Close follows ``c[t] = c[t-1] * exp(drift - vol**2/2 + vol*z)`` so the
    expected close is ``s0 * exp(drift * t)``.  Open is the previous close,
    high/low stretch the open-close range by a vol-scaled intraday factor.
    """
    drifts = np.asarray(drifts, dtype=np.float64)
    vols = np.asarray(vols, dtype=np.float64)
    if drifts.shape != vols.shape or drifts.ndim != 1 or drifts.size < 1:
        raise DataError("drifts and vols must be equal-length 1-D sequences")
    if days < 2:
        raise DataError("synthetic panel needs at least 2 days")
    if np.any(vols < 0):
        raise DataError("volatilities must be non-negative")
    rng = np.random.default_rng(rng)
    m = drifts.size
    z = rng.standard_normal((m, days - 1))
    steps = (drifts - 0.5 * vols ** 2)[:, None] + vols[:, None] * z
    close = s0 * np.exp(np.concatenate([np.zeros((m, 1)), np.cumsum(steps, axis=1)], axis=1))
    open_ = np.concatenate([np.full((m, 1), s0), close[:, :-1]], axis=1)
    span_hi = np.abs(rng.standard_normal((m, days))) * 0.5 * vols[:, None]
    span_lo = np.abs(rng.standard_normal((m, days))) * 0.5 * vols[:, None]
    high = np.maximum(open_, close) * np.exp(span_hi)
    low = np.minimum(open_, close) * np.exp(-span_lo)
    volume = np.round(1e6 * np.exp(0.3 * rng.standard_normal((m, days))))
    values = np.stack([open_, high, low, close, volume], axis=-1)
    calendar = np.busday_offset(np.datetime64(start, "D"), np.arange(days), roll="forward")
    ids = tuple(asset_ids) if asset_ids is not None else tuple(f"SYN{i}" for i in range(m))
    return Panel(ids, calendar, values)


# manifests ------------------------------------------------------------------

def load_manifest(path) -> dict:
    """Read a portfolio manifest; asset paths are resolved against its directory."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    doc = json.loads(path.read_text())
    if not isinstance(doc.get("assets"), list) or not doc["assets"]:
        raise DataError(f"{path}: manifest needs a non-empty 'assets' list")
    doc["assets"] = [str((path.parent / a).resolve()) if not Path(a).is_absolute() else a
                     for a in doc["assets"]]
    return doc


def panel_from_manifest(manifest: dict, rng=None) -> Panel:
    missing = [a for a in manifest["assets"] if not Path(a).exists()]
    if missing:
        raise FileNotFoundError(f"data file not found: {missing[0]}")
    series = [load_ohlcv(a) for a in manifest["assets"]]
    select = manifest.get("select")
    if select:
        lo, hi = manifest.get("start"), manifest.get("end")
        if lo or hi:
            series = [_clip_series(s, lo, hi) for s in series]
        return select_portfolio(series, m=select.get("m", 5), min_days=select.get("min_days", 1200),
                                rng=rng, max_draws=select.get("max_draws", 10000))
    return align_and_fill(series, manifest.get("start"), manifest.get("end"))


def _clip_series(s: AssetSeries, lo, hi) -> AssetSeries:
    keep = np.ones(len(s), dtype=bool)
    if lo:
        keep &= s.dates >= np.datetime64(lo, "D")
    if hi:
        keep &= s.dates <= np.datetime64(hi, "D")
    return AssetSeries(s.asset_id, s.dates[keep], s.values[keep])
