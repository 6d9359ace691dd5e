"""AdamW with decoupled weight decay and per-group learning rates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autograd import Parameter
from .errors import ContractError


@dataclass
class ParamGroup:
    params: list[Parameter]
    lr: float
    weight_decay: float = 0.0
    name: str = "default"


@dataclass
class AdamWState:
    """Moment estimates keyed by parameter identity, plus the step count."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[int, np.ndarray] = field(default_factory=dict)
    v: dict[int, np.ndarray] = field(default_factory=dict)


class AdamW:
    def __init__(self, groups: list[ParamGroup], betas=(0.9, 0.999), eps: float = 1e-8):
        self.groups = groups
        self.state = AdamWState(beta1=betas[0], beta2=betas[1], eps=eps)
        self._names = {}
        for g in groups:
            for i, p in enumerate(g.params):
                self._names[id(p)] = p.name or f"{g.name}[{i}]"

    def zero_grad(self) -> None:
        for g in self.groups:
            for p in g.params:
                p.grad = None

    def step(self) -> None:
        for g in self.groups:
            for p in g.params:
                if p.grad is None:
                    raise ContractError(f"parameter {self._names[id(p)]} has no gradient")
        adamw_step(self.groups, self.state)


def adamw_step(groups: list[ParamGroup], state: AdamWState) -> None:
    """One bias-corrected AdamW update. Parameters with ``grad is None`` are a contract error."""
    state.t += 1
    t = state.t
    b1, b2, eps = state.beta1, state.beta2, state.eps
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for g in groups:
        for p in g.params:
            grad = p.grad
            if grad is None:
                raise ContractError(f"parameter {p.name or '?'} has no gradient")
            key = id(p)
            m = state.m.get(key)
            if m is None:
                m = state.m[key] = np.zeros_like(p.data)
                state.v[key] = np.zeros_like(p.data)
            v = state.v[key]
            m *= b1
            m += (1.0 - b1) * grad
            v *= b2
            v += (1.0 - b2) * grad * grad
            if g.weight_decay:
                p.data *= 1.0 - g.lr * g.weight_decay
            p.data -= g.lr * (m / c1) / (np.sqrt(v / c2) + eps)
