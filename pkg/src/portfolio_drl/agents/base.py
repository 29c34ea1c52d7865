"""Shared estimator plumbing: seeding, epoch logs, prediction and checkpoints."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .. import ndcore as nd
from .._validation import check_panel, resolve_span
from ..env import EnvConfig, inject_noise
from ..market_data import Panel, relatives_stack, window_stack
from ..policies import Architecture


class TrainingError(RuntimeError):
    """Training hit a numerical dead end (infeasible reward, non-finite ratio or loss)."""


def seed_streams(random_state, n: int = 3) -> list[np.random.Generator]:
    """Independent generators for initialization, price noise and exploration.

    Keeping the streams apart means switching noise off leaves the
    initialization and exploration draws untouched.
    """
    if isinstance(random_state, np.random.Generator):
        random_state = int(random_state.integers(2 ** 63))
    seq = np.random.SeedSequence(random_state)
    return [np.random.default_rng(s) for s in seq.spawn(n)]


class EpochLog:
    """Per-epoch records kept in memory and optionally appended as JSON lines."""

    def __init__(self, path=None):
        self.records: list[dict] = []
        self.path = Path(path) if path else None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def write(self, record: dict) -> None:
        self.records.append(record)
        if self.path:
            with self.path.open("a") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")


class TrainingData:
    """States and next-day relatives for every decision day of a span."""

    def __init__(self, panel: Panel, env: EnvConfig, start: int, stop: int):
        self.days = np.arange(start, stop)
        self.states = window_stack(panel, self.days, env.window, env.features)
        self.relatives = relatives_stack(panel, self.days + 1)

    def __len__(self) -> int:
        return self.days.size


class BaseAgent(BaseEstimator):
    """Common estimator surface.

    ``fit(panel, start, stop)`` trains on decision days ``[start, stop)``;
    ``predict(panel, days)`` returns deterministic weights, one row per day.
    """

    kind = ""
    network_attr = ""

    # configuration --------------------------------------------------------
    def _env(self) -> EnvConfig:
        env = self.env
        if env is None:
            return EnvConfig()
        return env if isinstance(env, EnvConfig) else EnvConfig.from_dict(dict(env))

    def _arch(self) -> Architecture:
        arch = self.arch
        if arch is None:
            return Architecture()
        return arch if isinstance(arch, Architecture) else Architecture(**dict(arch))

    def _span(self, panel: Panel, start, stop) -> tuple[int, int]:
        return resolve_span(check_panel(panel), self._env().first_decision_day(), start, stop)

    def _training_panel(self, panel: Panel, noise_rng) -> Panel:
        sigma = self._env().noise_sigma
        return inject_noise(panel, sigma, noise_rng) if sigma > 0 else panel

    # inference --------------------------------------------------------------
    @property
    def network_(self):
        check_is_fitted(self, self.network_attr)
        return getattr(self, self.network_attr)

    def _batch_weights(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X: Panel, days=None) -> np.ndarray:
        """Deterministic portfolio weights (n_days, m+1) for the given decision days."""
        X = check_panel(X)
        env = self._env()
        days = np.arange(env.window - 1, X.n_days) if days is None else np.asarray(days, dtype=int)
        return self._batch_weights(window_stack(X, days, env.window, env.features))

    def policy(self, panel: Panel, t: int) -> np.ndarray:
        return self.predict(panel, [t])[0]

    def __call__(self, panel: Panel, t: int) -> np.ndarray:
        return self.policy(panel, t)

    # checkpoints ----------------------------------------------------------
    def config_dict(self) -> dict:
        out = {}
        for k, v in self.get_params(deep=False).items():
            if k == "log_path":
                continue
            out[k] = v.to_dict() if hasattr(v, "to_dict") else v
        if out.get("env") is None:
            out["env"] = self._env().to_dict()
        if out.get("arch") is None:
            out["arch"] = self._arch().to_dict()
        return out

    def save(self, path, meta: dict | None = None) -> None:
        net = self.network_
        doc = {"agent": self.kind, "config": self.config_dict(), "n_features": net.n_features,
               "window": net.window, **(meta or {})}
        nd.save_params(path, net.params, doc)


def load_agent(path):
    """Rebuild a fitted agent from a checkpoint written by :meth:`BaseAgent.save`."""
    from . import AGENTS

    params, meta = nd.load_params(path)
    kind = meta.get("agent")
    if kind not in AGENTS:
        raise ValueError(f"{path}: unknown agent kind {kind!r}")
    cfg = dict(meta["config"])
    cfg["env"] = EnvConfig.from_dict(cfg["env"])
    cfg["arch"] = Architecture(**cfg["arch"])
    agent = AGENTS[kind](**cfg)
    net = agent._build_network(np.random.default_rng(0))
    nd.check_compatible(net.params, params)
    for k, v in params.items():
        net.params[k][...] = v
    setattr(agent, agent.network_attr, net)
    return agent, meta
