"""JSON parameter checkpoints.

Layout::

    {
      "format": "portfolio-drl-checkpoint/1",
      "meta": {...},                       # free-form, JSON-serializable
      "params": [
        {"name": "actor/conv0.w", "shape": [8, 1, 3], "data": [...]},
        ...
      ]
    }

``data`` is the row-major flattening of the array.  Floats are written with
``repr`` precision so a save/load round trip is bit-exact.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT = "portfolio-drl-checkpoint/1"


def save_params(path, params: dict, meta: dict | None = None) -> None:
    records = [{"name": name, "shape": list(arr.shape), "data": arr.ravel().tolist()}
               for name, arr in sorted(params.items())]
    doc = {"format": FORMAT, "meta": meta or {}, "params": records}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_params(path) -> tuple[dict, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} file")
    params = {}
    for rec in doc["params"]:
        data = np.asarray(rec["data"], dtype=np.float64)
        shape = tuple(rec["shape"])
        if data.size != int(np.prod(shape)):
            raise ValueError(f"{path}: parameter {rec['name']!r} has {data.size} values for shape {shape}")
        params[rec["name"]] = data.reshape(shape)
    return params, doc.get("meta", {})


def check_compatible(expected: dict, loaded: dict) -> None:
    """Raise ValueError listing every name or shape mismatch."""
    problems = []
    for name in sorted(set(expected) | set(loaded)):
        if name not in loaded:
            problems.append(f"{name}: missing from checkpoint (expected {expected[name].shape})")
        elif name not in expected:
            problems.append(f"{name}: unexpected in checkpoint (shape {loaded[name].shape})")
        elif expected[name].shape != loaded[name].shape:
            problems.append(f"{name}: checkpoint shape {loaded[name].shape} != architecture shape {expected[name].shape}")
    if problems:
        raise ValueError("checkpoint does not match architecture:\n  " + "\n  ".join(problems))
