"""Backtesting, reference strategies, metrics and significance tests."""
from .backtest import EquityCurve, backtest
from .baselines import (BASELINES, UCRP, FollowTheLoser, FollowTheWinner, follow_loser,
                        follow_winner, ucrp_weights)
from .compare import COMPARED, ComparisonTable, compare_runs
from .metrics import (MetricsReport, compute_metrics, conditional_value_at_risk, max_drawdown,
                      sharpe_ratio)
from .stats import TTestResult, betainc, t_sf, welch_t_test

__all__ = [
    "BASELINES", "COMPARED", "ComparisonTable", "EquityCurve", "FollowTheLoser", "FollowTheWinner",
    "MetricsReport", "TTestResult", "UCRP", "backtest", "betainc", "compare_runs", "compute_metrics",
    "conditional_value_at_risk", "follow_loser", "follow_winner", "max_drawdown", "sharpe_ratio",
    "t_sf", "ucrp_weights", "welch_t_test",
]
