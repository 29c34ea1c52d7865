"""Frozen-policy replay through the environment."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .._validation import check_panel, resolve_span
from ..env import EnvConfig, InfeasibleRewardError, initial_state, step
from ..market_data import Panel


@dataclass(frozen=True)
class EquityCurve:
    """Portfolio value path starting at 1.

    ``values[0]`` is the value on the first decision day; ``values[k]`` the
    value after the k-th executed action, dated ``dates[k]``.
    """

    dates: np.ndarray
    values: np.ndarray
    log_returns: np.ndarray
    weights: np.ndarray
    turnover: np.ndarray
    diagnostic: str | None = None

    def __len__(self) -> int:
        return self.values.size

    @property
    def simple_returns(self) -> np.ndarray:
        return self.values[1:] / self.values[:-1] - 1.0

    def to_csv(self, path) -> None:
        """``date,value,turnover`` rows; the opening row has zero turnover."""
        turnover = np.concatenate([[0.0], self.turnover])
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "value", "turnover"])
            for d, v, tv in zip(self.dates, self.values, turnover):
                w.writerow([str(d), repr(float(v)), repr(float(tv))])


def _weight_schedule(policy, panel: Panel, days: np.ndarray):
    """Batch predictions when the policy offers them, else a per-day callback."""
    if hasattr(policy, "predict"):
        batch = np.asarray(policy.predict(panel, days), dtype=np.float64)
        return lambda k, t: batch[k]
    return lambda k, t: np.asarray(policy(panel, int(t)), dtype=np.float64)


def backtest(policy, panel: Panel, start: int | None = None, stop: int | None = None,
             config: EnvConfig | None = None) -> EquityCurve:
    """Replay ``policy`` on decision days ``[start, stop)`` starting from all cash.

    ``policy`` is an estimator with ``predict(panel, days)`` or a callable
    ``(panel, t) -> weights``.  An infeasible step ends the curve early and is
    reported in ``diagnostic``.
    """
    panel = check_panel(panel)
    cfg = config or EnvConfig()
    start, stop = resolve_span(panel, cfg.first_decision_day(), start, stop)
    days = np.arange(start, stop)
    weights_at = _weight_schedule(policy, panel, days)
    state = initial_state(panel, start)
    values, rets, ws, turns = [1.0], [], [], []
    dates = [panel.calendar[start]]
    diagnostic = None
    for k, t in enumerate(days):
        a = weights_at(k, t)
        try:
            state, r, info = step(state, a, cfg)
        except InfeasibleRewardError as exc:
            diagnostic = f"stopped at day {int(t)}: {exc}"
            break
        values.append(state.portfolio_value)
        rets.append(r)
        ws.append(a)
        turns.append(info["turnover"])
        dates.append(panel.calendar[t + 1])
    n = panel.n_assets + 1
    return EquityCurve(np.array(dates), np.array(values), np.array(rets),
                       np.array(ws).reshape(-1, n), np.array(turns), diagnostic)
