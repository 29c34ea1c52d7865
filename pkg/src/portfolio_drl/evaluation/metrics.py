"""Performance summaries of equity curves."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .backtest import EquityCurve


@dataclass(frozen=True)
class MetricsReport:
    """Average daily return in percent, daily Sharpe, max drawdown, CVaR and final value.

    ``sharpe_defined`` is False when daily returns have zero spread; ``sharpe``
    then holds 0.0.
    """

    adr: float
    sharpe: float
    mdd: float
    cvar: float
    final_apv: float
    n_days: int
    sharpe_defined: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def max_drawdown(values) -> float:
    """Largest peak-relative fall ``max_t (peak_t - P_t) / peak_t``."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0 or np.any(v <= 0):
        raise ValueError("drawdown needs a non-empty positive curve")
    peak = np.maximum.accumulate(v)
    return float(np.max(1.0 - v / peak))


def conditional_value_at_risk(returns, confidence: float = 0.95) -> float:
    """Mean of the worst ``ceil((1 - confidence) * n)`` returns (at least one)."""
    r = np.sort(np.asarray(returns, dtype=np.float64))
    if r.size == 0:
        raise ValueError("CVaR needs at least one return")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    k = max(1, math.ceil(round((1 - confidence) * r.size, 9)))
    return float(r[:k].mean())


def sharpe_ratio(returns, annualize: bool = False, periods: int = 252) -> tuple[float, bool]:
    r = np.asarray(returns, dtype=np.float64)
    sd = r.std(ddof=1)
    if sd == 0.0 or not np.isfinite(sd):
        return 0.0, False
    s = float(r.mean() / sd)
    return (s * math.sqrt(periods) if annualize else s), True


def compute_metrics(curve, cvar_c: float = 0.95, annualize: bool = False, periods: int = 252) -> MetricsReport:
    """Metrics of an :class:`EquityCurve` or a raw value sequence starting at the initial value."""
    values = curve.values if isinstance(curve, EquityCurve) else np.asarray(curve, dtype=np.float64)
    if values.size < 2:
        raise ValueError("metrics need a curve of at least 2 points")
    daily = values[1:] / values[:-1] - 1.0
    sharpe, defined = sharpe_ratio(daily, annualize, periods)
    return MetricsReport(
        adr=float(100.0 * daily.mean()),
        sharpe=sharpe,
        mdd=max_drawdown(values),
        cvar=conditional_value_at_risk(daily, cvar_c),
        final_apv=float(values[-1] / values[0]),
        n_days=int(daily.size),
        sharpe_defined=defined,
    )
