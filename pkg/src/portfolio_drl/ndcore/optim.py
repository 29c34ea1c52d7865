"""SGD and Adam updates over dicts of named parameter arrays."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _check_finite(grads: dict) -> None:
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")


@dataclass
class SGD:
    learning_rate: float = 1e-3
    step_count: int = 0
    kind: str = field(default="sgd", init=False)

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")

    def step(self, params: dict, grads: dict, maximize: bool = False) -> dict:
        _check_finite(grads)
        sign = 1.0 if maximize else -1.0
        for name, g in grads.items():
            p = params[name]
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter {name!r} shape {p.shape}")
            p += sign * self.learning_rate * g
        self.step_count += 1
        return params


@dataclass
class Adam:
    """Bias-corrected Adam.  Moments are created lazily per parameter name."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    kind: str = field(default="adam", init=False)
    m: dict = field(default_factory=dict, repr=False)
    v: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")

    def step(self, params: dict, grads: dict, maximize: bool = False) -> dict:
        _check_finite(grads)
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        sign = 1.0 if maximize else -1.0
        for name, g in grads.items():
            p = params[name]
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter {name!r} shape {p.shape}")
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p += sign * self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.epsilon)
        return params


def make_optimizer(kind: str, learning_rate: float):
    if kind == "adam":
        return Adam(learning_rate)
    if kind == "sgd":
        return SGD(learning_rate)
    raise ValueError(f"unknown optimizer {kind!r} (expected 'adam' or 'sgd')")


def opt_step(state, params: dict, grads: dict, maximize: bool = False) -> dict:
    return state.step(params, grads, maximize)
