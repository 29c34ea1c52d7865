"""Paired-run comparison: one-sided Welch tests on ADR, Sharpe and max drawdown."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import MetricsReport
from .stats import welch_t_test

COMPARED = ("adr", "sharpe", "mdd")


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple

    @property
    def pvalues(self) -> dict:
        return {r["metric"]: r["pvalue"] for r in self.rows}

    def to_csv(self, path) -> None:
        fields = ["metric", "n_a", "n_b", "mean_a", "mean_b", "statistic", "df", "pvalue", "alternative"]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(fields)
            for r in self.rows:
                w.writerow([repr(r[f]) if isinstance(r[f], float) else r[f] for f in fields])

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps({"tests": list(self.rows)}, indent=1, sort_keys=True) + "\n")


def compare_runs(reports_a, reports_b, metrics=COMPARED, alternative: str = "greater") -> ComparisonTable:
    """Welch-test each metric of run set A against run set B.

    With the default ``alternative="greater"`` each p value is evidence
    against H0: metric_A <= metric_B.
    """
    a = [r if isinstance(r, MetricsReport) else MetricsReport.from_dict(r) for r in reports_a]
    b = [r if isinstance(r, MetricsReport) else MetricsReport.from_dict(r) for r in reports_b]
    if len(a) != len(b):
        raise ValueError(f"paired comparison needs equal run counts, got {len(a)} and {len(b)}")
    if len(a) < 2:
        raise ValueError("comparison needs at least 2 runs per side")
    rows = []
    for m in metrics:
        xa = np.array([getattr(r, m) for r in a])
        xb = np.array([getattr(r, m) for r in b])
        res = welch_t_test(xa, xb, alternative)
        rows.append({"metric": m, "n_a": len(a), "n_b": len(b), "mean_a": float(xa.mean()),
                     "mean_b": float(xb.mean()), "statistic": res.statistic, "df": res.df,
                     "pvalue": res.pvalue, "alternative": alternative})
    return ComparisonTable(tuple(rows))
