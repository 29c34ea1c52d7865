"""Portfolio MDP with proportional transaction costs.

Timing: on decision day ``t`` the agent sees prices up to ``t`` and picks
weights ``a``.  Holding ``a`` over the next day earns ``a . y`` where
``y = price_relatives(panel, t + 1)``, minus ``cost_rate`` times the risky
turnover measured against ``w_prev``, the weights the previous action drifted
into.  Cash is component 0 and never pays cost.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from ._validation import cash_vertex, check_weights, resolve_span
from .market_data import (PRICE_FIELDS, Panel, normalize_window, parse_features,
                          price_relatives, relatives_stack)


class InfeasibleRewardError(ArithmeticError):
    """Gross return minus cost is not positive, so its log does not exist."""


@dataclass
class EnvConfig:
    cost_rate: float = 0.0025
    gamma: float = 0.99
    risk_beta: float = 0.0
    risk_window: int = 10
    window: int = 10
    features: tuple = ("close",)
    noise_sigma: float = 0.0

    def __post_init__(self):
        self.features = tuple(self.features)
        problems = self.validate()
        if problems:
            raise ValueError("invalid EnvConfig: " + "; ".join(problems))

    def validate(self) -> list[str]:
        out = []
        if not 0 <= self.cost_rate < 1:
            out.append("cost_rate must lie in [0, 1)")
        if not 0 < self.gamma < 1:
            out.append("gamma must lie in (0, 1)")
        if self.risk_beta < 0:
            out.append("risk_beta must be non-negative")
        if int(self.risk_window) < 1:
            out.append("risk_window must be a positive integer")
        if int(self.window) < 1:
            out.append("window must be a positive integer")
        if self.noise_sigma < 0:
            out.append("noise_sigma must be non-negative")
        try:
            parse_features(self.features)
        except ValueError as exc:
            out.append(str(exc))
        return out

    def first_decision_day(self) -> int:
        first = self.window - 1
        if self.risk_beta > 0:
            first = max(first, self.risk_window)
        return first

    def to_dict(self) -> dict:
        d = asdict(self)
        d["features"] = list(self.features)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown env settings: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EnvState:
    t: int
    w_prev: np.ndarray
    portfolio_value: float
    panel: Panel = field(repr=False)
    done: bool = False


# one-step accounting -----------------------------------------------------------

def evolve_weights(a, y) -> np.ndarray:
    """Weights after one day of price moves: ``(y * a) / (y . a)``."""
    a = np.asarray(a, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    gross = float(np.dot(y, a))
    assert gross > 0, "y . a must be positive for simplex a and positive y"
    return y * a / gross


def transaction_cost(a, w_prev, cost_rate: float) -> float:
    a = np.asarray(a, dtype=np.float64)
    w_prev = np.asarray(w_prev, dtype=np.float64)
    return cost_rate * float(np.abs(a[1:] - w_prev[1:]).sum())


def reward(a, w_prev, y, cost_rate: float) -> float:
    """``log(a . y - cost_rate * sum_{i>=1} |a_i - w_prev_i|)``."""
    a = np.asarray(a, dtype=np.float64)
    arg = float(np.dot(a, y)) - transaction_cost(a, w_prev, cost_rate)
    if arg <= 0:
        raise InfeasibleRewardError(f"gross return minus cost is {arg:.6g}; turnover is infeasible")
    return float(np.log(arg))


def risk_penalty(panel: Panel, t: int, w, window: int) -> float:
    """Weighted variance of each asset's price relatives over the last ``window`` days.

    Uses relatives for days ``t-window+1 .. t`` (cash included; its relatives
    are constant so it contributes nothing).
    """
    w = np.asarray(w, dtype=np.float64)
    return float(asset_variances(panel, [t], window)[0] @ w)


def asset_variances(panel: Panel, days, window: int) -> np.ndarray:
    """(len(days), m+1) population variance of each asset's last ``window`` relatives."""
    days = np.asarray(days, dtype=int)
    if days.size and days.min() < window:
        raise ValueError(f"risk penalty at day {days.min()} needs at least {window} prior relatives")
    lags = days[:, None] + np.arange(-window + 1, 1)[None, :]
    ys = relatives_stack(panel, lags.ravel()).reshape(days.size, window, -1)
    dev = ys - ys.mean(axis=1, keepdims=True)
    return (dev ** 2).sum(axis=1) / window


def risk_adjusted_return(rewards, penalties, gamma: float, beta: float) -> float:
    """``sum_t gamma**t * (r_t - beta * penalty_t)`` with t counted from 0."""
    rewards = np.asarray(rewards, dtype=np.float64)
    penalties = np.asarray(penalties, dtype=np.float64)
    if rewards.shape != penalties.shape:
        raise ValueError("rewards and penalties must have equal length")
    disc = gamma ** np.arange(rewards.size)
    return float(np.sum(disc * (rewards - beta * penalties)))


def inject_noise(panel: Panel, sigma: float, rng=None) -> Panel:
    """Multiply every open/high/low/close cell by ``1 + eps``, eps ~ N(0, sigma**2).

    Volume is untouched; factors are floored just above zero so prices stay
    positive.  ``sigma == 0`` returns an identical copy without drawing.
    """
    if sigma < 0:
        raise ValueError("noise sigma must be non-negative")
    values = panel.values.copy()
    if sigma > 0:
        rng = np.random.default_rng(rng)
        eps = rng.normal(0.0, sigma, size=values.shape[:2] + (len(PRICE_FIELDS),))
        values[..., :len(PRICE_FIELDS)] *= np.maximum(1.0 + eps, 1e-6)
    return Panel(panel.asset_ids, panel.calendar.copy(), values)


# episode stepping ----------------------------------------------------------------

def initial_state(panel: Panel, t: int) -> EnvState:
    return EnvState(t=t, w_prev=cash_vertex(panel.n_assets), portfolio_value=1.0, panel=panel)


def step(state: EnvState, a, cfg: EnvConfig) -> tuple[EnvState, float, dict]:
    """Execute ``a`` on day ``state.t``.

    Stepping with no next day left returns the state unchanged, reward 0 and
    ``info["done"] = True``.
    """
    panel = state.panel
    if state.done or state.t + 1 >= panel.n_days:
        return replace(state, done=True), 0.0, {"done": True}
    a = check_weights(a, panel.n_assets + 1, "action")
    y = price_relatives(panel, state.t + 1)
    cost = transaction_cost(a, state.w_prev, cfg.cost_rate)
    r = reward(a, state.w_prev, y, cfg.cost_rate)
    info = {
        "y": y,
        "cost": cost,
        "turnover": float(np.abs(a[1:] - state.w_prev[1:]).sum()),
        "done": state.t + 2 >= panel.n_days,
    }
    if cfg.risk_beta > 0:
        info["risk_penalty"] = risk_penalty(panel, state.t, a, cfg.risk_window)
    nxt = EnvState(t=state.t + 1, w_prev=evolve_weights(a, y),
                   portfolio_value=state.portfolio_value * float(np.exp(r)),
                   panel=panel, done=info["done"])
    return nxt, r, info


class PortfolioEnv:
    """Stateful wrapper with a ``reset``/``step`` loop over ``[start, stop)``.

    ``stop`` is the exclusive last decision day; the episode ends once the
    action for day ``stop - 1`` has been executed.
    """

    def __init__(self, panel: Panel, config: EnvConfig | None = None, start: int | None = None,
                 stop: int | None = None):
        self.panel = panel
        self.config = config or EnvConfig()
        self.start, self.stop = resolve_span(panel, self.config.first_decision_day(), start, stop)
        self.state: EnvState | None = None

    def observe(self, t: int | None = None) -> np.ndarray:
        t = self.state.t if t is None else t
        return normalize_window(self.panel, t, self.config.window, self.config.features)

    def reset(self) -> np.ndarray:
        self.state = initial_state(self.panel, self.start)
        return self.observe()

    def step(self, a) -> tuple[np.ndarray | None, float, bool, dict]:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        if self.state.t >= self.stop:
            return None, 0.0, True, {"done": True}
        self.state, r, info = step(self.state, a, self.config)
        done = self.state.t >= self.stop or info["done"]
        info["done"] = done
        obs = None if done else self.observe()
        return obs, r, done, info
