"""Proximal policy optimization with a clipped surrogate and Monte-Carlo advantages.

Actions are Gaussian pre-softmax scores; the executed portfolio is their
softmax.  Advantages are discounted reward-to-go minus the value estimate,
and the value head is regressed onto the reward-to-go.
"""
from __future__ import annotations

import numpy as np

from .. import ndcore as nd
from ..env import reward as step_reward, evolve_weights
from .._validation import cash_vertex
from ..market_data import Panel
from ..policies import GaussianPolicy
from .base import BaseAgent, EpochLog, TrainingData, TrainingError, seed_streams

REDUCTIONS = ("mean", "sum")


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    """``G_t = sum_{t' >= t} gamma**(t'-t) r_t'``."""
    rewards = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(rewards)
    acc = 0.0
    for t in range(rewards.size - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def advantages(rewards, values, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(G - V, G)`` for one trajectory."""
    g = discounted_returns(rewards, gamma)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != g.shape:
        raise ValueError("values and rewards must have equal length")
    adv = g - values
    if not np.all(np.isfinite(adv)):
        raise TrainingError("non-finite advantages")
    return adv, g


def _reduce(x: nd.Tensor, reduction: str) -> nd.Tensor:
    if reduction not in REDUCTIONS:
        raise ValueError(f"reduction must be one of {REDUCTIONS}")
    return x.mean() if reduction == "mean" else x.sum()


def probability_ratio(logp_new: nd.Tensor, logp_old) -> nd.Tensor:
    return nd.exp(logp_new - np.asarray(logp_old, dtype=np.float64))


def clipped_surrogate(logp_new: nd.Tensor, logp_old, adv, eps: float = 0.2,
                      reduction: str = "mean") -> nd.Tensor:
    """``reduce_t min(r_t A_t, clip(r_t, 1-eps, 1+eps) A_t)`` with ``r_t = exp(logp_new - logp_old)``.

    On ties the unclipped term carries the gradient, so at ``r = 1`` the
    gradient is the plain importance-weighted one.
    """
    if not 0 < eps < 1:
        raise ValueError("clip epsilon must lie in (0, 1)")
    adv = np.asarray(adv, dtype=np.float64)
    ratio = probability_ratio(logp_new, logp_old)
    return _reduce(nd.minimum(ratio * adv, nd.clip(ratio, 1 - eps, 1 + eps) * adv), reduction)


def vanilla_surrogate(logp_new: nd.Tensor, logp_old, adv, reduction: str = "mean") -> nd.Tensor:
    return _reduce(probability_ratio(logp_new, logp_old) * np.asarray(adv, dtype=np.float64), reduction)


def gaussian_kl(mean_p, std_p, mean_q, std_q) -> np.ndarray:
    """KL(p || q) between diagonal Gaussians, summed over the last axis."""
    mean_p, std_p, mean_q, std_q = (np.asarray(v, dtype=np.float64) for v in (mean_p, std_p, mean_q, std_q))
    per = np.log(std_q / std_p) + (std_p ** 2 + (mean_p - mean_q) ** 2) / (2 * std_q ** 2) - 0.5
    return per.sum(axis=-1)


def rollout_rewards(weights: np.ndarray, relatives: np.ndarray, cost_rate: float) -> np.ndarray:
    """Per-step log returns of executing ``weights[t]`` against ``relatives[t]``, starting from cash."""
    prev = cash_vertex(weights.shape[1] - 1)
    out = np.empty(len(weights))
    for t, (a, y) in enumerate(zip(weights, relatives)):
        out[t] = step_reward(a, prev, y, cost_rate)
        prev = evolve_weights(a, y)
    return out


class PPOAgent(BaseAgent):
    """PPO portfolio agent.

    Parameters
    ----------
    env, arch : see :class:`PGAgent`; ``arch.init_std`` sets the initial policy spread.
    iterations : int
        Rollout/update cycles.
    inner_epochs : int
        Surrogate passes per rollout.
    clip_eps : float
    actor_lr, critic_lr : float
    optimizer : {"sgd", "adam"}
    horizon : int, optional
        Rollout length; a random contiguous stretch of the span when shorter
        than it, the whole span when ``None``.
    reduction : {"mean", "sum"}
        How per-step surrogate and value losses are combined.
    random_state : int, optional
    log_path : path, optional
    """

    kind = "ppo"
    network_attr = "policy_"

    def __init__(self, env=None, arch=None, iterations: int = 1000, inner_epochs: int = 4,
                 clip_eps: float = 0.2, actor_lr: float = 1e-3, critic_lr: float = 1e-3,
                 optimizer: str = "sgd", horizon=None, reduction: str = "mean",
                 random_state=None, log_path=None):
        self.env = env
        self.arch = arch
        self.iterations = iterations
        self.inner_epochs = inner_epochs
        self.clip_eps = clip_eps
        self.actor_lr = actor_lr
        self.critic_lr = critic_lr
        self.optimizer = optimizer
        self.horizon = horizon
        self.reduction = reduction
        self.random_state = random_state
        self.log_path = log_path

    def _build_network(self, rng) -> GaussianPolicy:
        env = self._env()
        return GaussianPolicy(len(env.features), env.window, self._arch(), rng=rng)

    def _batch_weights(self, states):
        return self.network_.deterministic_weights(states)

    def _subset(self, data: TrainingData, rng) -> tuple[np.ndarray, np.ndarray]:
        if self.horizon is None or self.horizon >= len(data):
            return data.states, data.relatives
        lo = int(rng.integers(0, len(data) - self.horizon + 1))
        return data.states[lo:lo + self.horizon], data.relatives[lo:lo + self.horizon]

    def _grads(self, loss, p, keys):
        return dict(zip(keys, nd.grad(loss, [p[k] for k in keys])))

    def fit(self, X: Panel, start=None, stop=None):
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must lie in (0, 1)")
        if self.reduction not in REDUCTIONS:
            raise ValueError(f"reduction must be one of {REDUCTIONS}")
        env = self._env()
        start, stop = self._span(X, start, stop)
        init_rng, noise_rng, explore_rng = seed_streams(self.random_state)
        pol = self.policy_ = self._build_network(init_rng)
        actor_keys = sorted(k for k in pol.params if k.startswith("policy/"))
        value_keys = sorted(k for k in pol.params if k.startswith("value/"))
        actor_opt = nd.make_optimizer(self.optimizer, self.actor_lr)
        critic_opt = nd.make_optimizer(self.optimizer, self.critic_lr)
        log = EpochLog(self.log_path)
        for it in range(int(self.iterations)):
            data = TrainingData(self._training_panel(X, noise_rng), env, start, stop)
            states, relatives = self._subset(data, explore_rng)
            frozen = {k: nd.Tensor(v) for k, v in pol.params.items()}
            mean_old, std_old = (t.data for t in pol.dist(frozen, states))
            scores = mean_old + std_old * explore_rng.standard_normal(mean_old.shape)
            logp_old = pol.log_prob(nd.Tensor(mean_old), nd.Tensor(std_old), scores).data
            try:
                rewards = rollout_rewards(nd.softmax(scores).data, relatives, env.cost_rate)
            except ArithmeticError as exc:
                raise TrainingError(f"iteration {it}: {exc}") from exc
            adv, returns = advantages(rewards, pol.value(frozen, states).data, env.gamma)
            try:
                for _ in range(int(self.inner_epochs)):
                    p = {k: nd.Tensor(v, requires_grad=k in actor_keys) for k, v in pol.params.items()}
                    mean, std = pol.dist(p, states)
                    surr = clipped_surrogate(pol.log_prob(mean, std, scores), logp_old, adv,
                                             self.clip_eps, self.reduction)
                    actor_opt.step(pol.params, self._grads(surr, p, actor_keys), maximize=True)
                    p = {k: nd.Tensor(v, requires_grad=k in value_keys) for k, v in pol.params.items()}
                    err = pol.value(p, states) - returns
                    vloss = _reduce(err * err, self.reduction)
                    critic_opt.step(pol.params, self._grads(vloss, p, value_keys))
                mean_new, std_new = pol.mean_std(states)
                ratio = np.exp(pol.log_prob(nd.Tensor(mean_new), nd.Tensor(std_new), scores).data - logp_old)
            except FloatingPointError as exc:
                raise TrainingError(f"iteration {it}: non-finite update ({exc}); policy spread may have collapsed") from exc
            if not np.all(np.isfinite(ratio)):
                raise TrainingError(f"iteration {it}: non-finite probability ratio")
            log.write({"epoch": it, "objective": float(rewards.mean()),
                       "train_apv": float(np.exp(rewards.sum())),
                       "surrogate": float(surr.data), "value_loss": float(vloss.data),
                       "mean_ratio": float(ratio.mean()),
                       "kl": float(gaussian_kl(mean_old, std_old, mean_new, std_new).mean())})
        self.history_ = log.records
        return self


def ppo_train(panel: Panel, iterations: int = 1000, inner_epochs: int = 4, clip_eps: float = 0.2,
              random_state=None, start=None, stop=None, **params) -> PPOAgent:
    return PPOAgent(iterations=iterations, inner_epochs=inner_epochs, clip_eps=clip_eps,
                    random_state=random_state, **params).fit(panel, start, stop)
