"""Command-line front end: gen-data, train, backtest, compare.

Every command is deterministic given its inputs and seed; primary outputs
are written with ``repr`` floats and sorted JSON keys so reruns are
byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import ndcore as nd
from .agents import TrainingError
from .config import ConfigError, RunConfig
from .evaluation import UCRP, backtest, compare_runs, compute_metrics
from .evaluation.metrics import MetricsReport
from .market_data import DataError, gen_synthetic, load_manifest, panel_from_manifest, write_ohlcv

CHECKPOINT = "checkpoint.json"
TRAIN_LOG = "train_log.jsonl"
RESOLVED = "resolved_config.json"
CURVE = "equity_curve.csv"
METRICS = "metrics.json"
VS_UCRP = "curve_vs_ucrp.csv"


class CLIError(RuntimeError):
    pass


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _out_dir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CLIError(f"cannot create output directory {path}: {exc}") from exc
    return path


# gen-data ---------------------------------------------------------------

def _read_data_spec(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"data spec not found: {path}")
    spec = json.loads(path.read_text())
    problems = []
    assets = spec.get("assets")
    if not isinstance(assets, list) or not assets:
        problems.append("assets must be a non-empty list of {id, drift, vol}")
    else:
        for i, a in enumerate(assets):
            missing = {"drift", "vol"} - set(a)
            if missing:
                problems.append(f"assets[{i}]: missing {sorted(missing)}")
            elif a["vol"] < 0:
                problems.append(f"assets[{i}]: vol must be non-negative")
        ids = [a.get("id", f"SYN{i}") for i, a in enumerate(assets)]
        if len(set(ids)) != len(ids):
            problems.append("asset ids must be unique")
    days = spec.get("days")
    if not isinstance(days, int) or days < 2:
        problems.append(f"days must be an integer >= 2, got {days!r}")
    if problems:
        raise ConfigError(problems)
    return spec


def cmd_gen_data(spec_path, out_dir, seed: int | None = None) -> list[Path]:
    """Write one OHLCV CSV per asset plus ``manifest.json``; returns the CSV paths."""
    spec = _read_data_spec(spec_path)
    seed = spec.get("seed") if seed is None else seed
    if seed is None:
        raise ConfigError(["seed is required (in the spec or via --seed)"])
    assets = spec["assets"]
    ids = [a.get("id", f"SYN{i}") for i, a in enumerate(assets)]
    panel = gen_synthetic([a["drift"] for a in assets], [a["vol"] for a in assets], spec["days"],
                          rng=seed, s0=spec.get("s0", 100.0), start=spec.get("start", "2010-01-04"),
                          asset_ids=ids)
    out = _out_dir(out_dir)
    paths = []
    for s in panel.to_series():
        path = out / f"{s.asset_id}.csv"
        write_ohlcv(path, s)
        paths.append(path)
    _write_json(out / "manifest.json", {"assets": [p.name for p in paths]})
    return paths


# train / backtest -------------------------------------------------------

def read_config(path, seed=None, out=None, features=None) -> RunConfig:
    """Load a run config, applying command-line overrides before validation."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config not found: {path}")
    doc = json.loads(path.read_text())
    if seed is not None:
        doc["seed"] = seed
    if out is not None:
        doc["out_dir"] = str(out)
    if features is not None:
        doc["env"] = {**(doc.get("env") or {}), "features": features}
    return RunConfig.from_dict(doc, base_dir=path.parent)


def _load_panel(cfg: RunConfig):
    return panel_from_manifest(load_manifest(cfg.manifest), rng=cfg.seed)


def cmd_train(config_path, seed=None, out=None, features=None) -> Path:
    """Fit the configured agent on the training span; returns the run directory."""
    cfg = read_config(config_path, seed, out, features)
    if not cfg.trainable:
        raise CLIError(f"agent {cfg.agent!r} has nothing to train; run backtest directly")
    panel = _load_panel(cfg)
    (t0, t1), _ = cfg.split.spans(panel, cfg.env.first_decision_day())
    run = _out_dir(cfg.out_dir)
    agent = cfg.build_agent(log_path=run / TRAIN_LOG)
    agent.fit(panel, t0, t1)
    # the last training decision looks at prices through day t1
    agent.save(run / CHECKPOINT, {"seed": cfg.seed, "manifest": cfg.manifest,
                                  "train_days": [t0, t1],
                                  "train_dates": [str(panel.calendar[t0]), str(panel.calendar[t1])]})
    cfg.write(run / RESOLVED)
    return run


def _restore(cfg: RunConfig, checkpoint: Path, test_date):
    if not checkpoint.exists():
        raise FileNotFoundError(f"checkpoint not found: {checkpoint}")
    params, meta = nd.load_params(checkpoint)
    if meta.get("agent") != cfg.agent:
        raise CLIError(f"checkpoint holds a {meta.get('agent')!r} agent, config asks for {cfg.agent!r}")
    agent = cfg.build_agent()
    net = agent._build_network(np.random.default_rng(0))
    nd.check_compatible(net.params, params)
    for k, v in params.items():
        net.params[k][...] = v
    setattr(agent, agent.network_attr, net)
    seen = meta.get("train_dates", [None, None])[1]
    if seen is not None and np.datetime64(seen) > np.datetime64(test_date):
        raise CLIError(f"look-ahead: checkpoint trained on prices through {seen}, "
                       f"test span starts {test_date}")
    return agent


def cmd_backtest(config_path, checkpoint=None, seed=None, out=None, features=None) -> Path:
    """Evaluate on the test span; writes the equity curve, metrics and a UCRP overlay."""
    cfg = read_config(config_path, seed, out, features)
    panel = _load_panel(cfg)
    (t0, t1), (s0, s1) = cfg.split.spans(panel, cfg.env.first_decision_day())
    run = _out_dir(cfg.out_dir)
    if cfg.trainable:
        ckpt = Path(checkpoint) if checkpoint is not None else run / CHECKPOINT
        agent = _restore(cfg, ckpt, panel.calendar[s0])
    else:
        agent = cfg.build_agent().fit(panel, t0, t1)
    curve = backtest(agent, panel, s0, s1, cfg.env)
    ucrp = backtest(UCRP(), panel, s0, s1, cfg.env)
    curve.to_csv(run / CURVE)
    _write_json(run / METRICS, compute_metrics(curve).to_dict())
    with (run / VS_UCRP).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", cfg.agent, "ucrp"])
        n = min(len(curve.values), len(ucrp.values))
        for d, a, b in zip(curve.dates[:n], curve.values[:n], ucrp.values[:n]):
            w.writerow([str(d), repr(float(a)), repr(float(b))])
    if curve.diagnostic:
        print(f"warning: {curve.diagnostic}", file=sys.stderr)
    return run


# compare ----------------------------------------------------------------

def _read_metrics(run) -> MetricsReport:
    path = Path(run) / METRICS
    if not path.exists():
        raise FileNotFoundError(f"run {run}: no {METRICS} (run backtest first)")
    return MetricsReport.from_dict(json.loads(path.read_text()))


def cmd_compare(runs_a, runs_b, out, alternative: str = "greater") -> Path:
    """Welch-test run set A against run set B; writes ``comparison.csv`` and ``comparison.json``."""
    if len(runs_a) < 2 or len(runs_b) < 2:
        raise CLIError("compare needs at least 2 runs per side")
    table = compare_runs([_read_metrics(r) for r in runs_a], [_read_metrics(r) for r in runs_b],
                         alternative=alternative)
    dest = _out_dir(out)
    table.to_csv(dest / "comparison.csv")
    table.to_json(dest / "comparison.json")
    return dest


# entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="portfolio-drl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic OHLCV dataset and manifest")
    g.add_argument("--config", required=True, help="data spec JSON")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int)

    for name, text in (("train", "fit an agent on the training span"),
                       ("backtest", "evaluate on the test span")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--out", help="overrides the config out_dir")
        p.add_argument("--features", help="close|close+high|close+open|close+low, optionally +volume")
        if name == "backtest":
            p.add_argument("--checkpoint", help="defaults to <out_dir>/checkpoint.json")

    c = sub.add_parser("compare", help="Welch-test two sets of backtest runs")
    c.add_argument("--a", nargs="+", required=True, metavar="RUN_DIR")
    c.add_argument("--b", nargs="+", required=True, metavar="RUN_DIR")
    c.add_argument("--out", required=True)
    c.add_argument("--alternative", choices=("greater", "less", "two-sided"), default="greater")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen-data":
            result = cmd_gen_data(args.config, args.out, args.seed)
            print(f"wrote {len(result)} asset files to {args.out}")
        elif args.command == "train":
            print(f"trained: {cmd_train(args.config, args.seed, args.out, args.features)}")
        elif args.command == "backtest":
            run = cmd_backtest(args.config, args.checkpoint, args.seed, args.out, args.features)
            print(f"backtest: {run}")
        else:
            print(f"comparison: {cmd_compare(args.a, args.b, args.out, args.alternative)}")
    except (CLIError, ConfigError, DataError, TrainingError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
