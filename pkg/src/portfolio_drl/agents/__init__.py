"""Training algorithms: policy gradient, DDPG and PPO."""
from .base import BaseAgent, EpochLog, TrainingError, load_agent, seed_streams
from .ddpg import DDPGAgent, actor_step, critic_loss, critic_step, ddpg_train, td_targets
from .pg import PGAgent, pg_objective, pg_train
from .ppo import (PPOAgent, advantages, clipped_surrogate, discounted_returns, gaussian_kl,
                  ppo_train, probability_ratio, rollout_rewards, vanilla_surrogate)
from .replay import (BufferUnderfilled, OUProcess, ReplayBuffer, TargetPair, Transition,
                     buffer_push, buffer_sample, ou_step, soft_update)

AGENTS = {"pg": PGAgent, "ddpg": DDPGAgent, "ppo": PPOAgent}

__all__ = [
    "AGENTS", "BaseAgent", "BufferUnderfilled", "DDPGAgent", "EpochLog", "OUProcess", "PGAgent",
    "PPOAgent", "ReplayBuffer", "TargetPair", "TrainingError", "Transition", "actor_step",
    "advantages", "buffer_push", "buffer_sample", "clipped_surrogate", "critic_loss", "critic_step",
    "ddpg_train", "discounted_returns", "gaussian_kl", "load_agent", "ou_step", "pg_objective",
    "pg_train", "ppo_train", "probability_ratio", "rollout_rewards", "seed_streams", "soft_update",
    "td_targets", "vanilla_surrogate",
]
