"""Input checks shared by the env, agents and evaluation code."""
from __future__ import annotations

import numpy as np

from .market_data import Panel

SIMPLEX_TOL = 1e-9


def check_weights(w, n: int | None = None, name: str = "weights") -> np.ndarray:
    """Return ``w`` as a float array after checking it lies on the simplex."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {w.shape}")
    if n is not None and w.size != n:
        raise ValueError(f"{name} must have {n} components, got {w.size}")
    if not np.all(np.isfinite(w)) or np.any(w < -SIMPLEX_TOL):
        raise ValueError(f"{name} must be finite and non-negative")
    if abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"{name} must sum to 1 (got {w.sum():.12g})")
    return w


def check_relatives(y, n: int | None = None) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or (n is not None and y.size != n):
        raise ValueError(f"price relatives must be a vector of length {n}, got shape {y.shape}")
    if not np.all(y > 0) or not np.all(np.isfinite(y)):
        raise ValueError("price relatives must be finite and positive")
    return y


def check_panel(X) -> Panel:
    if not isinstance(X, Panel):
        raise TypeError(f"expected a Panel, got {type(X).__name__}")
    return X


def cash_vertex(n_assets: int) -> np.ndarray:
    w = np.zeros(n_assets + 1)
    w[0] = 1.0
    return w


def resolve_span(panel: Panel, first_ok: int, start: int | None, stop: int | None) -> tuple[int, int]:
    """Decision days ``start <= t < stop``; each needs day t+1 for its outcome."""
    start = first_ok if start is None else int(start)
    stop = panel.n_days - 1 if stop is None else int(stop)
    if start < first_ok:
        raise ValueError(f"span start {start} precedes the first usable day {first_ok}")
    if stop > panel.n_days - 1:
        raise ValueError(f"span stop {stop} leaves no next day in a {panel.n_days}-day panel")
    if stop <= start:
        raise ValueError(f"empty span [{start}, {stop})")
    return start, stop
