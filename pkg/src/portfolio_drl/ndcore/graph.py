"""Named-parameter computation graphs on top of :mod:`.tensor`."""
from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .tensor import ShapeError, Tensor, grad

Params = dict[str, np.ndarray]


class Graph:
    """A differentiable function of named parameters and named inputs.

    ``fn(params, **inputs)`` receives the parameters wrapped as leaf tensors
    and returns a Tensor (or a dict of Tensors).  :meth:`forward` records the
    tape; :meth:`backward` then returns one gradient array per parameter.

    Parameters
    ----------
    fn : callable
        Builds the output from ``params`` (dict of Tensor) and keyword inputs.
    params : dict of ndarray
        Parameter storage.  Arrays are read at every forward call, so in-place
        optimizer updates are picked up automatically.
    input_shapes : dict, optional
        Expected input shapes; ``None`` entries in a shape match any extent.
    """

    def __init__(self, fn: Callable, params: Params, input_shapes: Mapping | None = None):
        self.fn = fn
        self.params = params
        self.input_shapes = dict(input_shapes or {})
        self._leaves: dict[str, Tensor] | None = None
        self._output = None

    def _check_inputs(self, inputs: Mapping) -> None:
        missing = set(self.input_shapes) - set(inputs)
        if missing:
            raise ShapeError(f"graph inputs missing: {sorted(missing)}")
        for name, expected in self.input_shapes.items():
            got = np.shape(inputs[name])
            if len(got) != len(expected) or any(e is not None and e != g for e, g in zip(expected, got)):
                raise ShapeError(f"input {name!r}: expected shape {tuple(expected)}, got {got}")

    def forward(self, **inputs):
        self._check_inputs(inputs)
        self._leaves = {k: Tensor(v, requires_grad=True) for k, v in self.params.items()}
        wrapped = {k: v if isinstance(v, Tensor) else Tensor(v) for k, v in inputs.items()}
        self._output = self.fn(self._leaves, **wrapped)
        return self._output

    def backward(self, seed=None, output: str | None = None) -> Params:
        if self._output is None:
            raise RuntimeError("backward called before forward")
        out = self._output
        if isinstance(out, dict):
            if output is None:
                raise ValueError(f"graph has several outputs {sorted(out)}; name one")
            out = out[output]
        names = list(self._leaves)
        grads = grad(out, [self._leaves[n] for n in names], seed)
        return dict(zip(names, grads))


def forward(graph: Graph, inputs: Mapping):
    return graph.forward(**inputs)


def backward(graph: Graph, output_seed=None) -> Params:
    return graph.backward(output_seed)


def param_count(params: Params) -> int:
    return int(sum(v.size for v in params.values()))
