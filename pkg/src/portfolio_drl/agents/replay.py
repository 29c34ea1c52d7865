"""Experience replay, Ornstein-Uhlenbeck exploration noise and target-network blending."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class BufferUnderfilled(RuntimeError):
    """Raised when a minibatch larger than the buffer is requested."""


class Transition(NamedTuple):
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Bounded FIFO of transitions with uniform sampling without replacement."""

    def __init__(self, capacity: int = 10_000):
        if int(capacity) < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = int(capacity)
        self._items: deque = deque(maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self._items)

    def push(self, transition) -> None:
        self._items.append(Transition(*transition))

    def sample_indices(self, n: int, rng) -> np.ndarray:
        if n > len(self._items):
            raise BufferUnderfilled(f"requested {n} transitions from a buffer holding {len(self._items)}")
        return rng.choice(len(self._items), size=n, replace=False)

    def sample(self, n: int, rng) -> Transition:
        """Stacked minibatch: every field gains a leading batch axis."""
        picked = [self._items[i] for i in self.sample_indices(n, rng)]
        return Transition(
            state=np.stack([t.state for t in picked]),
            action=np.stack([t.action for t in picked]),
            reward=np.array([t.reward for t in picked], dtype=np.float64),
            next_state=np.stack([t.next_state for t in picked]),
            done=np.array([t.done for t in picked], dtype=bool),
        )

    def contents(self) -> list:
        return list(self._items)


def buffer_push(buffer: ReplayBuffer, transition) -> None:
    buffer.push(transition)


def buffer_sample(buffer: ReplayBuffer, n: int, rng) -> Transition:
    return buffer.sample(n, rng)


@dataclass
class OUProcess:
    """Euler-discretized Ornstein-Uhlenbeck process reverting to zero."""

    size: int
    theta: float = 0.15
    sigma: float = 0.2
    dt: float = 1.0
    x0: float | np.ndarray = 0.0
    x: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.theta <= 0 or self.sigma < 0 or self.dt <= 0:
            raise ValueError("OU process needs theta > 0, sigma >= 0 and dt > 0")
        self.reset()

    def reset(self) -> None:
        self.x = np.broadcast_to(np.asarray(self.x0, dtype=np.float64), (self.size,)).copy()

    def step(self, rng) -> np.ndarray:
        xi = rng.standard_normal(self.size) if self.sigma > 0 else 0.0
        self.x = self.x + self.theta * (0.0 - self.x) * self.dt + self.sigma * math.sqrt(self.dt) * xi
        return self.x.copy()


def ou_step(process: OUProcess, rng) -> np.ndarray:
    return process.step(rng)


def soft_update(target: dict, online: dict, tau: float) -> dict:
    """In place ``target <- tau * online + (1 - tau) * target`` for every parameter."""
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    if set(target) != set(online):
        raise ValueError("target and online parameter names differ")
    for name, theta in online.items():
        if target[name].shape != theta.shape:
            raise ValueError(f"shape mismatch for {name!r}: {target[name].shape} vs {theta.shape}")
        if tau == 1:
            target[name][...] = theta
        else:
            target[name] *= 1.0 - tau
            target[name] += tau * theta
    return target


class TargetPair:
    """Online parameters and a slowly tracking copy."""

    def __init__(self, online: dict, tau: float = 0.01):
        if not 0 < tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        self.online = online
        self.target = {k: v.copy() for k, v in online.items()}
        self.tau = tau

    def update(self) -> None:
        soft_update(self.target, self.online, self.tau)
