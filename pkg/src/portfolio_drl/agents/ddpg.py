"""Deep deterministic policy gradient with replay, target networks and OU exploration.

Exploration noise is added to the actor's pre-softmax scores, so executed
actions stay on the simplex.
"""
from __future__ import annotations

import numpy as np

from .. import ndcore as nd
from ..env import PortfolioEnv
from ..market_data import Panel
from ..policies import IIEActor, QCritic
from .base import BaseAgent, EpochLog, TrainingError, seed_streams
from .replay import OUProcess, ReplayBuffer, Transition, soft_update


def _leaves(params: dict, trainable: bool) -> dict:
    return {k: nd.Tensor(v, requires_grad=trainable) for k, v in params.items()}


def critic_loss(critic: QCritic, p: dict, batch: Transition, targets) -> nd.Tensor:
    """Mean squared TD error ``mean_i (y_i - Q(s_i, a_i))**2``."""
    err = critic.q(p, batch.state, batch.action) - np.asarray(targets, dtype=np.float64)
    return (err * err).mean()


def td_targets(batch: Transition, gamma: float, actor_t: IIEActor, critic_t: QCritic,
               actor_params: dict, critic_params: dict) -> np.ndarray:
    """``r + gamma * Q'(s', mu'(s'))``; terminal transitions do not bootstrap."""
    next_a = actor_t.weights(_leaves(actor_params, False), batch.next_state).data
    q_next = critic_t.q(_leaves(critic_params, False), batch.next_state, next_a).data
    return batch.reward + gamma * np.where(batch.done, 0.0, q_next)


def critic_step(critic: QCritic, batch: Transition, targets, opt) -> float:
    p = _leaves(critic.params, True)
    loss = critic_loss(critic, p, batch, targets)
    names = list(p)
    opt.step(critic.params, dict(zip(names, nd.grad(loss, [p[k] for k in names]))))
    return float(loss.data)


def actor_step(actor: IIEActor, critic: QCritic, states, opt) -> float:
    """Ascend ``mean Q(s, mu(s))`` in the actor parameters; the critic is held fixed."""
    p = _leaves(actor.params, True)
    q = critic.q(_leaves(critic.params, False), states, actor.weights(p, states)).mean()
    names = list(p)
    opt.step(actor.params, dict(zip(names, nd.grad(q, [p[k] for k in names]))), maximize=True)
    return float(q.data)


class DDPGAgent(BaseAgent):
    """DDPG portfolio agent.

    Parameters
    ----------
    env, arch : see :class:`PGAgent`.
    episodes : int
        Passes over the training span.
    actor_lr, critic_lr : float
    tau : float
        Target blend rate.
    buffer_size, batch_size : int
    ou_theta, ou_sigma, ou_dt : float
        Exploration process settings.
    optimizer : {"adam", "sgd"}
    random_state : int, optional
    log_path : path, optional
    """

    kind = "ddpg"
    network_attr = "actor_"

    def __init__(self, env=None, arch=None, episodes: int = 10, actor_lr: float = 1e-3,
                 critic_lr: float = 1e-1, tau: float = 1e-2, buffer_size: int = 10_000,
                 batch_size: int = 64, ou_theta: float = 0.15, ou_sigma: float = 0.2,
                 ou_dt: float = 1.0, optimizer: str = "adam", random_state=None, log_path=None):
        self.env = env
        self.arch = arch
        self.episodes = episodes
        self.actor_lr = actor_lr
        self.critic_lr = critic_lr
        self.tau = tau
        self.buffer_size = buffer_size
        self.batch_size = batch_size
        self.ou_theta = ou_theta
        self.ou_sigma = ou_sigma
        self.ou_dt = ou_dt
        self.optimizer = optimizer
        self.random_state = random_state
        self.log_path = log_path

    def _build_network(self, rng) -> IIEActor:
        env = self._env()
        return IIEActor(len(env.features), env.window, self._arch(), rng=rng)

    def _batch_weights(self, states):
        return self.network_(states)

    def fit(self, X: Panel, start=None, stop=None):
        if self.batch_size > self.buffer_size:
            raise ValueError("batch_size cannot exceed buffer_size")
        env_cfg = self._env()
        start, stop = self._span(X, start, stop)
        init_rng, noise_rng, explore_rng = seed_streams(self.random_state)
        self.actor_ = self._build_network(init_rng)
        self.critic_ = QCritic(len(env_cfg.features), env_cfg.window, self._arch(), rng=init_rng)
        actor_target = {k: v.copy() for k, v in self.actor_.params.items()}
        critic_target = {k: v.copy() for k, v in self.critic_.params.items()}
        actor_opt = nd.make_optimizer(self.optimizer, self.actor_lr)
        critic_opt = nd.make_optimizer(self.optimizer, self.critic_lr)
        buffer = ReplayBuffer(self.buffer_size)
        log = EpochLog(self.log_path)
        n = X.n_assets + 1
        for episode in range(int(self.episodes)):
            env = PortfolioEnv(self._training_panel(X, noise_rng), env_cfg, start, stop)
            ou = OUProcess(n, self.ou_theta, self.ou_sigma, self.ou_dt)
            state, done = env.reset(), False
            losses, rewards = [], []
            while not done:
                scores = self.actor_.logits(_leaves(self.actor_.params, False), state).data[0]
                action = nd.softmax(scores + ou.step(explore_rng)).data
                next_state, r, done, _ = env.step(action)
                if next_state is None:
                    next_state = state
                buffer.push((state, action, r, next_state, done))
                rewards.append(r)
                state = next_state
                if len(buffer) < self.batch_size:
                    continue  # warm-up
                batch = buffer.sample(self.batch_size, explore_rng)
                try:
                    targets = td_targets(batch, env_cfg.gamma, self.actor_, self.critic_,
                                         actor_target, critic_target)
                    losses.append(critic_step(self.critic_, batch, targets, critic_opt))
                    actor_step(self.actor_, self.critic_, batch.state, actor_opt)
                except FloatingPointError as exc:
                    raise TrainingError(f"episode {episode}: {exc}") from exc
                soft_update(critic_target, self.critic_.params, self.tau)
                soft_update(actor_target, self.actor_.params, self.tau)
            log.write({"epoch": episode, "objective": float(np.mean(rewards)),
                       "train_apv": float(np.exp(np.sum(rewards))),
                       "critic_loss": float(np.mean(losses)) if losses else None})
        self.actor_target_, self.critic_target_ = actor_target, critic_target
        self.history_ = log.records
        return self


def ddpg_train(panel: Panel, episodes: int = 10, random_state=None, start=None, stop=None,
               **params) -> DDPGAgent:
    return DDPGAgent(episodes=episodes, random_state=random_state, **params).fit(panel, start, stop)
