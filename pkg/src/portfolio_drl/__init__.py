"""Continuous-action deep reinforcement learning for portfolio management."""
from .agents import DDPGAgent, PGAgent, PPOAgent, load_agent
from .config import RunConfig
from .env import EnvConfig, PortfolioEnv, inject_noise, reward
from .evaluation import UCRP, FollowTheLoser, FollowTheWinner, backtest, compare_runs, compute_metrics
from .market_data import Panel, gen_synthetic, load_ohlcv
from .ndcore import Graph
from .policies import Architecture, GaussianPolicy, IIEActor, QCritic

__all__ = [
    "Architecture", "DDPGAgent", "EnvConfig", "FollowTheLoser", "FollowTheWinner", "GaussianPolicy",
    "Graph", "IIEActor", "PGAgent", "PPOAgent", "Panel", "PortfolioEnv", "QCritic", "RunConfig", "UCRP",
    "backtest", "compare_runs", "compute_metrics", "gen_synthetic", "inject_noise", "load_agent",
    "load_ohlcv", "reward",
]
