"""Rule-based reference strategies with the same estimator surface as the agents."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .._validation import check_panel
from ..market_data import Panel


def ucrp_weights(m: int, include_cash: bool = True) -> np.ndarray:
    """Uniform constant-rebalanced weights over ``m`` risky assets (plus cash by default)."""
    if m < 1:
        raise ValueError("need at least one risky asset")
    if include_cash:
        return np.full(m + 1, 1.0 / (m + 1))
    w = np.full(m + 1, 1.0 / m)
    w[0] = 0.0
    return w


def _lookback_relatives(panel: Panel, t: int, lookback: int) -> np.ndarray:
    if lookback < 1:
        raise ValueError("lookback must be positive")
    if t < lookback:
        raise ValueError(f"day {t} has fewer than {lookback} days of history")
    return panel.close[:, t] / panel.close[:, t - lookback]


def _vertex(n: int, i: int) -> np.ndarray:
    w = np.zeros(n)
    w[i] = 1.0
    return w


def follow_winner(panel: Panel, t: int, lookback: int = 5) -> np.ndarray:
    """All weight on the risky asset with the largest close-to-close growth; ties go to the lowest index."""
    rel = _lookback_relatives(panel, t, lookback)
    return _vertex(panel.n_assets + 1, 1 + int(np.argmax(rel)))


def follow_loser(panel: Panel, t: int, lookback: int = 5) -> np.ndarray:
    """All weight on the risky asset with the smallest growth; ties go to the lowest index."""
    rel = _lookback_relatives(panel, t, lookback)
    return _vertex(panel.n_assets + 1, 1 + int(np.argmin(rel)))


class _Baseline(BaseEstimator):
    kind = ""

    def fit(self, X=None, start=None, stop=None):
        return self

    def policy(self, panel: Panel, t: int) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X: Panel, days) -> np.ndarray:
        X = check_panel(X)
        return np.array([self.policy(X, int(t)) for t in days]).reshape(-1, X.n_assets + 1)

    def __call__(self, panel: Panel, t: int) -> np.ndarray:
        return self.policy(panel, t)


class UCRP(_Baseline):
    kind = "ucrp"

    def __init__(self, include_cash: bool = True):
        self.include_cash = include_cash

    def policy(self, panel: Panel, t: int) -> np.ndarray:
        return ucrp_weights(panel.n_assets, self.include_cash)


class FollowTheWinner(_Baseline):
    kind = "winner"

    def __init__(self, lookback: int = 5):
        self.lookback = lookback

    def policy(self, panel: Panel, t: int) -> np.ndarray:
        return follow_winner(panel, t, self.lookback)


class FollowTheLoser(_Baseline):
    kind = "loser"

    def __init__(self, lookback: int = 5):
        self.lookback = lookback

    def policy(self, panel: Panel, t: int) -> np.ndarray:
        return follow_loser(panel, t, self.lookback)


BASELINES = {"ucrp": UCRP, "winner": FollowTheWinner, "loser": FollowTheLoser}
