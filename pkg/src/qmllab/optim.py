"""SGD and Adam over lists of numpy arrays, updated in place."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ShapeError


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


@dataclass
class OptimizerState:
    kind: OptimizerKind = OptimizerKind.ADAM
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        self.kind = OptimizerKind(self.kind)


def optimizer_step(state: OptimizerState, params, grads, config) -> list:
    """One update of ``params`` (list of arrays, modified in place).

    ``config`` is a learning rate or anything with a ``learning_rate`` attribute.
    """
    lr = float(getattr(config, "learning_rate", config))
    single = isinstance(params, np.ndarray)
    if single:
        params, grads = [params], [grads]
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameter arrays vs {len(grads)} gradients")
    for p, g in zip(params, grads):
        if np.shape(p) != np.shape(g):
            raise ShapeError(f"parameter shape {np.shape(p)} vs gradient shape {np.shape(g)}")

    if state.kind is OptimizerKind.SGD:
        for p, g in zip(params, grads):
            p -= lr * np.asarray(g, dtype=float)
        return params[0] if single else params

    if not state.m:
        state.m = [np.zeros_like(p, dtype=float) for p in params]
        state.v = [np.zeros_like(p, dtype=float) for p in params]
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=float)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params[0] if single else params
