"""Deterministic policy gradient on the batch-mean log return, with optional price noise.

Each epoch the actor is rolled over the whole training span in one batch.
The previous-day weights that set the transaction cost are the actor's own
weights from the day before, drifted by that day's price relatives, so the
cost term is differentiated through both days.  With ``noise_sigma > 0``
every epoch trains on a freshly perturbed copy of the prices.
"""
from __future__ import annotations

import numpy as np

from .. import ndcore as nd
from ..env import asset_variances
from ..market_data import Panel
from ..policies import IIEActor
from .base import BaseAgent, EpochLog, TrainingData, TrainingError, seed_streams


def pg_objective(actor: IIEActor, p: dict, states, relatives, cost_rate: float,
                 variances=None, risk_beta: float = 0.0):
    """Objective and per-day log returns for one rollout.

    states: (T, m, F, W); relatives: (T, m+1) next-day price relatives.
    Returns ``(J, log_returns)`` where
    ``J = mean_t log(w_t . y_t - cost_rate * sum_i>=1 |w_t,i - w'_t,i|) - risk_beta * mean_t w_t . var_t``.
    """
    y = np.asarray(relatives, dtype=np.float64)
    n_days, n = y.shape
    w = actor.weights(p, states)
    gross = (w * y).sum(axis=1)
    drifted = w * y / gross.reshape(n_days, 1)
    cash = np.zeros((1, n))
    cash[0, 0] = 1.0
    prev = nd.concat([cash, drifted[:-1]], axis=0) if n_days > 1 else nd.as_tensor(cash)
    turnover = nd.abs_(w[:, 1:] - prev[:, 1:]).sum(axis=1)
    log_returns = nd.log(gross - turnover * cost_rate)
    objective = log_returns.mean()
    if risk_beta > 0:
        objective = objective - (w * np.asarray(variances)).sum(axis=1).mean() * risk_beta
    return objective, log_returns


class PGAgent(BaseAgent):
    """Policy-gradient portfolio agent.

    Parameters
    ----------
    env : EnvConfig or dict, optional
        Market and reward settings (window, features, cost, noise, risk).
    arch : Architecture or dict, optional
        Evaluator sizes.
    epochs : int
        Full-span gradient steps.
    learning_rate : float
    optimizer : {"adam", "sgd"}
    random_state : int, optional
    log_path : path, optional
        JSON-lines epoch log destination.
    """

    kind = "pg"
    network_attr = "actor_"

    def __init__(self, env=None, arch=None, epochs: int = 1000, learning_rate: float = 1e-3,
                 optimizer: str = "adam", random_state=None, log_path=None):
        self.env = env
        self.arch = arch
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.random_state = random_state
        self.log_path = log_path

    def _build_network(self, rng) -> IIEActor:
        env = self._env()
        return IIEActor(len(env.features), env.window, self._arch(), rng=rng)

    def _batch_weights(self, states):
        return self.network_(states)

    def objective(self, params: dict, data: TrainingData, variances=None):
        env = self._env()
        p = {k: nd.Tensor(v, requires_grad=True) for k, v in params.items()}
        j, log_returns = pg_objective(self.actor_, p, data.states, data.relatives, env.cost_rate,
                                      variances, env.risk_beta)
        return j, log_returns, p

    def fit(self, X: Panel, start=None, stop=None):
        env = self._env()
        start, stop = self._span(X, start, stop)
        init_rng, noise_rng, _ = seed_streams(self.random_state)
        self.actor_ = self._build_network(init_rng)
        opt = nd.make_optimizer(self.optimizer, self.learning_rate)
        log = EpochLog(self.log_path)
        for epoch in range(int(self.epochs)):
            panel = self._training_panel(X, noise_rng)
            data = TrainingData(panel, env, start, stop)
            variances = asset_variances(panel, data.days, env.risk_window) if env.risk_beta > 0 else None
            try:
                j, log_returns, p = self.objective(self.actor_.params, data, variances)
            except FloatingPointError as exc:
                log.write({"epoch": epoch, "aborted": f"infeasible rollout: {exc}"})
                continue
            names = list(p)
            grads = dict(zip(names, nd.grad(j, [p[k] for k in names])))
            try:
                opt.step(self.actor_.params, grads, maximize=True)
            except FloatingPointError as exc:
                raise TrainingError(f"epoch {epoch}: {exc}") from exc
            log.write({"epoch": epoch, "objective": float(j.data),
                       "train_apv": float(np.exp(log_returns.data.sum()))})
        self.history_ = log.records
        self.n_epochs_ = int(self.epochs)
        return self


def pg_train(panel: Panel, epochs: int = 1000, random_state=None, start=None, stop=None, **params) -> PGAgent:
    """Fit a :class:`PGAgent` on ``panel`` and return it (``history_`` holds per-epoch APV)."""
    return PGAgent(epochs=epochs, random_state=random_state, **params).fit(panel, start, stop)
