"""Run configuration: JSON in, fully materialized JSON out."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .agents import AGENTS
from .env import EnvConfig
from .evaluation import BASELINES
from .market_data import Panel, parse_features
from .policies import Architecture

AGENT_KINDS = tuple(AGENTS) + tuple(BASELINES)
_RESERVED = {"env", "arch", "random_state", "log_path"}
SECTIONS = ("manifest", "agent", "seed", "out_dir", "env", "arch", "train", "split")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid run config:\n  " + "\n  ".join(problems))


@dataclass
class Split:
    """Train/test division, by dates or by fraction of the usable days.

    Training uses decision days whose next-day outcome falls on or before
    ``train_end``; testing starts at ``test_start``, which must come after it.
    Without dates, the first ``train_fraction`` of usable days trains.
    """

    train_start: str | None = None
    train_end: str | None = None
    test_start: str | None = None
    test_end: str | None = None
    train_fraction: float = 0.8

    def validate(self) -> list[str]:
        out = []
        for name in ("train_start", "train_end", "test_start", "test_end"):
            v = getattr(self, name)
            if v is not None:
                try:
                    np.datetime64(v, "D")
                except ValueError:
                    out.append(f"split.{name}: {v!r} is not an ISO date")
        if (self.train_end is None) != (self.test_start is None):
            out.append("split: give both train_end and test_start, or neither")
        if not 0 < self.train_fraction < 1:
            out.append("split.train_fraction must lie in (0, 1)")
        if not out and self.train_end and np.datetime64(self.test_start) <= np.datetime64(self.train_end):
            out.append(f"split: test_start {self.test_start} must come after train_end {self.train_end} (look-ahead)")
        return out

    def spans(self, panel: Panel, first_ok: int) -> tuple[tuple[int, int], tuple[int, int]]:
        """Decision-day spans ``((train_start, train_stop), (test_start, test_stop))``."""
        cal = panel.calendar
        last = panel.n_days - 1
        if self.train_end is None:
            cut = first_ok + int(self.train_fraction * (last - first_ok))
            train, test = (first_ok, cut), (cut, last)
        else:
            lo = first_ok
            if self.train_start:
                lo = max(lo, int(np.searchsorted(cal, np.datetime64(self.train_start, "D"))))
            # decision t is usable when its outcome day t+1 is within the training period
            stop = int(np.searchsorted(cal, np.datetime64(self.train_end, "D"), side="right")) - 1
            t0 = max(first_ok, int(np.searchsorted(cal, np.datetime64(self.test_start, "D"))))
            t1 = last
            if self.test_end:
                t1 = min(last, int(np.searchsorted(cal, np.datetime64(self.test_end, "D"), side="right")) - 1)
            train, test = (lo, stop), (t0, t1)
        problems = []
        if train[1] <= train[0]:
            problems.append(f"training span is empty for a {panel.n_days}-day panel")
        if test[1] <= test[0]:
            problems.append(f"test span is empty for a {panel.n_days}-day panel")
        if train[1] > test[0]:
            problems.append("training outcomes overlap the test span (look-ahead)")
        if problems:
            raise ConfigError(problems)
        return train, test


@dataclass
class RunConfig:
    manifest: str
    agent: str
    seed: int
    out_dir: str
    env: EnvConfig = field(default_factory=EnvConfig)
    arch: Architecture = field(default_factory=Architecture)
    train: dict = field(default_factory=dict)
    split: Split = field(default_factory=Split)

    @property
    def agent_class(self):
        return AGENTS.get(self.agent) or BASELINES[self.agent]

    @property
    def trainable(self) -> bool:
        return self.agent in AGENTS

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None) -> "RunConfig":
        """Validate everything, collect every problem, then build."""
        doc = dict(doc)
        problems = []
        unknown = set(doc) - set(SECTIONS)
        if unknown:
            problems.append(f"unknown sections: {sorted(unknown)}")
        for req in ("manifest", "agent", "seed", "out_dir"):
            if doc.get(req) is None:
                problems.append(f"{req} is required")
        kind = doc.get("agent")
        if kind is not None and kind not in AGENT_KINDS:
            problems.append(f"agent must be one of {list(AGENT_KINDS)}, got {kind!r}")
        seed = doc.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or seed < 0):
            problems.append("seed must be a non-negative integer")

        env_doc = dict(doc.get("env") or {})
        env_fields = {f.name for f in fields(EnvConfig)}
        bad = set(env_doc) - env_fields
        if bad:
            problems.append(f"env: unknown settings {sorted(bad)}")
        env = None
        try:
            env_doc = {k: v for k, v in env_doc.items() if k in env_fields}
            if "features" in env_doc:
                env_doc["features"] = parse_features(env_doc["features"])
            env = EnvConfig(**env_doc)
        except (ValueError, TypeError) as exc:
            problems.append(f"env: {exc}")

        arch_doc = dict(doc.get("arch") or {})
        bad = set(arch_doc) - {f.name for f in fields(Architecture)}
        if bad:
            problems.append(f"arch: unknown settings {sorted(bad)}")
        arch = Architecture(**{k: v for k, v in arch_doc.items() if k not in bad})
        problems += [f"arch: {p}" for p in arch.validate(env.window if env else None)]

        train = dict(doc.get("train") or {})
        if kind in AGENT_KINDS:
            allowed = _train_defaults(kind)
            bad = set(train) - set(allowed)
            if bad:
                problems.append(f"train: settings {sorted(bad)} do not apply to agent {kind!r} "
                                f"(allowed: {sorted(allowed)})")
            train = {**allowed, **{k: v for k, v in train.items() if k in allowed}}

        split_doc = dict(doc.get("split") or {})
        bad = set(split_doc) - {f.name for f in fields(Split)}
        if bad:
            problems.append(f"split: unknown settings {sorted(bad)}")
        split = Split(**{k: v for k, v in split_doc.items() if k not in bad})
        problems += split.validate()

        if problems:
            raise ConfigError(problems)
        manifest = Path(doc["manifest"])
        if base_dir is not None and not manifest.is_absolute():
            manifest = Path(base_dir) / manifest
        return cls(str(manifest.resolve()), kind, seed, str(doc["out_dir"]), env, arch, train, split)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config not found: {path}")
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)

    def to_dict(self) -> dict:
        return {"manifest": self.manifest, "agent": self.agent, "seed": self.seed,
                "out_dir": self.out_dir, "env": self.env.to_dict(), "arch": self.arch.to_dict(),
                "train": dict(self.train), "split": asdict(self.split)}

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    def build_agent(self, log_path=None):
        if self.trainable:
            return self.agent_class(env=self.env, arch=self.arch, random_state=self.seed,
                                    log_path=log_path, **self.train)
        return self.agent_class(**self.train)


def _train_defaults(kind: str) -> dict:
    cls = AGENTS.get(kind) or BASELINES[kind]
    return {k: v for k, v in cls().get_params(deep=False).items() if k not in _RESERVED}
