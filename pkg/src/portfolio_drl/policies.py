"""Network architectures built on :mod:`ndcore`.

Every network scores the m+1 asset streams with one shared evaluator
(identical independent evaluators): a valid 1-D convolution over the time
window, residual blocks, then a per-stream head.  Cash is an extra stream
fed constant ones.  Because parameters are shared across streams, the
parameter count does not depend on the number of assets.

Parameters live in flat ``{name: ndarray}`` dicts with a network prefix
(``actor/``, ``critic/``, ``policy/``, ``value/``).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import ndcore as nd
from .ndcore import Tensor


@dataclass
class Architecture:
    channels: int = 8
    kernel: int = 3
    n_residual: int = 1
    critic_hidden: int = 16
    init_std: float = 0.1

    def validate(self, window: int | None = None) -> list[str]:
        out = []
        if self.channels < 1:
            out.append("channels must be positive")
        if self.kernel < 1 or self.kernel % 2 == 0:
            out.append("kernel must be a positive odd integer (residual convs keep length)")
        if self.n_residual < 0:
            out.append("n_residual must be non-negative")
        if self.critic_hidden < 1:
            out.append("critic_hidden must be positive")
        if self.init_std <= 0:
            out.append("init_std must be positive")
        if window is not None and window < self.kernel:
            out.append(f"window {window} shorter than kernel {self.kernel}")
        return out

    def to_dict(self) -> dict:
        return asdict(self)


def _uniform(rng, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_evaluator(rng, prefix: str, n_features: int, window: int, arch: Architecture) -> dict:
    c, k = arch.channels, arch.kernel
    p = {f"{prefix}conv0.w": _uniform(rng, (c, n_features, k), n_features * k),
         f"{prefix}conv0.b": np.zeros(c)}
    for i in range(arch.n_residual):
        for j in (1, 2):
            p[f"{prefix}res{i}.conv{j}.w"] = _uniform(rng, (c, c, k), c * k)
            p[f"{prefix}res{i}.conv{j}.b"] = np.zeros(c)
    return p


def evaluator_width(window: int, arch: Architecture) -> int:
    return arch.channels * (window - arch.kernel + 1)


def evaluator(p: dict, prefix: str, x, arch: Architecture) -> Tensor:
    """(N, F, W) streams -> (N, channels * (W - kernel + 1)) features."""
    h = nd.relu(nd.conv1d(x, p[f"{prefix}conv0.w"], p[f"{prefix}conv0.b"]))
    pad = arch.kernel // 2
    for i in range(arch.n_residual):
        r = nd.relu(nd.conv1d(h, p[f"{prefix}res{i}.conv1.w"], p[f"{prefix}res{i}.conv1.b"], pad=pad))
        r = nd.conv1d(r, p[f"{prefix}res{i}.conv2.w"], p[f"{prefix}res{i}.conv2.b"], pad=pad)
        h = nd.relu(h + r)
    n = h.shape[0]
    return h.reshape(n, -1)


def with_cash_stream(states) -> np.ndarray:
    """(B, m, F, W) or (m, F, W) -> (B, m+1, F, W) with a leading all-ones stream."""
    s = np.asarray(states, dtype=np.float64)
    if s.ndim == 3:
        s = s[None]
    if s.ndim != 4:
        raise nd.ShapeError(f"states must be (batch, assets, features, window), got {s.shape}")
    ones = np.ones((s.shape[0], 1) + s.shape[2:])
    return np.concatenate([ones, s], axis=1)


class _Network:
    prefix = ""

    def __init__(self, n_features: int, window: int, arch: Architecture | None = None):
        self.n_features = n_features
        self.window = window
        self.arch = arch or Architecture()
        problems = self.arch.validate(window)
        if problems:
            raise ValueError("invalid architecture: " + "; ".join(problems))

    def _check(self, states) -> np.ndarray:
        x = with_cash_stream(states)
        if x.shape[2:] != (self.n_features, self.window):
            raise nd.ShapeError(f"{type(self).__name__}: expected per-asset input "
                                f"{(self.n_features, self.window)}, got {x.shape[2:]}")
        return x

    def _streams(self, p, x: np.ndarray, prefix: str) -> Tensor:
        b, n = x.shape[:2]
        return evaluator(p, prefix, x.reshape((b * n,) + x.shape[2:]), self.arch)

    def n_params(self) -> int:
        return nd.param_count(self.params)


class IIEActor(_Network):
    """Deterministic portfolio policy: per-stream scores -> softmax weights."""

    def __init__(self, n_features: int, window: int, arch: Architecture | None = None,
                 rng=None, prefix: str = "actor/"):
        super().__init__(n_features, window, arch)
        rng = np.random.default_rng(rng)
        self.prefix = prefix
        d = evaluator_width(window, self.arch)
        self.params = init_evaluator(rng, prefix, n_features, window, self.arch)
        self.params[f"{prefix}head.w"] = np.zeros((1, d))
        self.params[f"{prefix}head.b"] = np.zeros(1)
        self.params[f"{prefix}cash_bias"] = np.zeros(1)

    def logits(self, p: dict, states) -> Tensor:
        x = self._check(states)
        b, n = x.shape[:2]
        pre = self.prefix
        scores = nd.dense(self._streams(p, x, pre), p[f"{pre}head.w"], p[f"{pre}head.b"]).reshape(b, n)
        cash = np.zeros(n)
        cash[0] = 1.0
        return scores + p[f"{pre}cash_bias"] * cash

    def weights(self, p: dict, states) -> Tensor:
        return nd.softmax(self.logits(p, states), axis=-1)

    def __call__(self, states) -> np.ndarray:
        """Portfolio weights for a batch (B, m, F, W) or a single state (m, F, W)."""
        single = np.ndim(states) == 3
        w = self.weights(_wrap(self.params), states).data
        return w[0] if single else w


class QCritic(_Network):
    """Q(s, a): each stream's features plus its own weight -> hidden -> scalar, summed over streams."""

    def __init__(self, n_features: int, window: int, arch: Architecture | None = None,
                 rng=None, prefix: str = "critic/"):
        super().__init__(n_features, window, arch)
        rng = np.random.default_rng(rng)
        self.prefix = prefix
        d = evaluator_width(window, self.arch)
        h = self.arch.critic_hidden
        self.params = init_evaluator(rng, prefix, n_features, window, self.arch)
        self.params[f"{prefix}hidden.w"] = _uniform(rng, (h, d + 1), d + 1)
        self.params[f"{prefix}hidden.b"] = np.zeros(h)
        self.params[f"{prefix}out.w"] = np.zeros((1, h))
        self.params[f"{prefix}out.b"] = np.zeros(1)

    def q(self, p: dict, states, actions) -> Tensor:
        x = self._check(states)
        b, n = x.shape[:2]
        actions = nd.as_tensor(actions)
        if actions.shape != (b, n):
            raise nd.ShapeError(f"QCritic: actions {actions.shape} do not match states batch {(b, n)}")
        pre = self.prefix
        feats = nd.concat([self._streams(p, x, pre), actions.reshape(b * n, 1)], axis=1)
        hidden = nd.relu(nd.dense(feats, p[f"{pre}hidden.w"], p[f"{pre}hidden.b"]))
        per_stream = nd.dense(hidden, p[f"{pre}out.w"], p[f"{pre}out.b"]).reshape(b, n)
        return per_stream.sum(axis=1)

    def __call__(self, states, actions) -> np.ndarray:
        single = np.ndim(states) == 3
        a = np.atleast_2d(actions)
        out = self.q(_wrap(self.params), states, a).data
        return float(out[0]) if single else out


def _inv_softplus(y: float) -> float:
    return math.log(math.expm1(y))


class GaussianPolicy(_Network):
    """Diagonal Gaussian over pre-softmax scores, plus a state-value head.

    ``mean`` and ``std`` share one evaluator trunk (``policy/``); the value
    estimate uses its own trunk (``value/``) pooled over streams.
    """

    MIN_STD = 1e-6

    def __init__(self, n_features: int, window: int, arch: Architecture | None = None, rng=None):
        super().__init__(n_features, window, arch)
        rng = np.random.default_rng(rng)
        d = evaluator_width(window, self.arch)
        p = init_evaluator(rng, "policy/", n_features, window, self.arch)
        p["policy/mean.w"] = np.zeros((1, d))
        p["policy/mean.b"] = np.zeros(1)
        p["policy/std.w"] = np.zeros((1, d))
        p["policy/std.b"] = np.full(1, _inv_softplus(self.arch.init_std - self.MIN_STD))
        p.update(init_evaluator(rng, "value/", n_features, window, self.arch))
        p["value/out.w"] = np.zeros((1, d))
        p["value/out.b"] = np.zeros(1)
        self.params = p

    def dist(self, p: dict, states) -> tuple[Tensor, Tensor]:
        x = self._check(states)
        b, n = x.shape[:2]
        feats = self._streams(p, x, "policy/")
        mean = nd.dense(feats, p["policy/mean.w"], p["policy/mean.b"]).reshape(b, n)
        std = nd.softplus(nd.dense(feats, p["policy/std.w"], p["policy/std.b"])).reshape(b, n) + self.MIN_STD
        return mean, std

    def value(self, p: dict, states) -> Tensor:
        x = self._check(states)
        b, n = x.shape[:2]
        feats = self._streams(p, x, "value/")
        pooled = feats.reshape(b, n, -1).mean(axis=1)
        return nd.dense(pooled, p["value/out.w"], p["value/out.b"]).reshape(b)

    @staticmethod
    def log_prob(mean: Tensor, std: Tensor, actions) -> Tensor:
        """Exact diagonal-Gaussian log density, summed over components: shape (B,)."""
        z = (nd.as_tensor(actions) - mean) / std
        per = z * z * -0.5 - nd.log(std) - 0.5 * math.log(2 * math.pi)
        return per.sum(axis=-1)

    def mean_std(self, states) -> tuple[np.ndarray, np.ndarray]:
        mean, std = self.dist(_wrap(self.params), states)
        return mean.data, std.data

    def sample(self, state, rng, size: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """``size`` draws of pre-softmax scores for one state, with their log-densities."""
        mean, std = self.mean_std(state)
        u = mean[0] + std[0] * rng.standard_normal((size, mean.shape[1]))
        lp = self.log_prob(Tensor(mean), Tensor(std), u).data
        return u, lp

    def act(self, state, rng) -> tuple[np.ndarray, float]:
        """Sample pre-softmax scores for one state and return (scores, log_prob)."""
        u, lp = self.sample(state, rng)
        return u[0], float(lp[0])

    def deterministic_weights(self, states) -> np.ndarray:
        single = np.ndim(states) == 3
        mean, _ = self.mean_std(states)
        w = nd.softmax(mean, axis=-1).data
        return w[0] if single else w


def _wrap(params: dict) -> dict:
    return {k: Tensor(v) for k, v in params.items()}


def actor_weights(actor: IIEActor, state) -> np.ndarray:
    return actor(state)


def q_value(critic: QCritic, state, action) -> float:
    return critic(state, action)


def gaussian_act(policy: GaussianPolicy, state, rng) -> tuple[np.ndarray, float]:
    return policy.act(state, rng)


def softmax_np(u) -> np.ndarray:
    return nd.softmax(np.asarray(u, dtype=np.float64), axis=-1).data
