"""Layers built on :mod:`recbench.autograd`."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from . import autograd as ag
from .autograd import Parameter, Tensor
from .errors import ConfigurationError

INIT_STD = 0.02
_MASK_FILL = -1e9


def truncated_normal(rng: np.random.Generator, shape, std: float = INIT_STD) -> np.ndarray:
    """Normal(0, std) samples redrawn until they lie within two standard deviations."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return (out * std).astype(ag.get_default_dtype())


class Module:
    """Container that discovers parameters and sub-modules from its attributes."""

    training: bool = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def _children(self) -> Iterator[tuple[str, object]]:
        for name, value in vars(self).items():
            if isinstance(value, (Module, Parameter)):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, (Module, Parameter)):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        seen: set[int] = set()
        for name, value in self._walk(prefix):
            if id(value) not in seen:
                seen.add(id(value))
                yield name, value

    def _walk(self, prefix):
        for name, child in self._children():
            full = f"{prefix}{name}"
            if isinstance(child, Parameter):
                yield full, child
            else:
                yield from child._walk(full + ".")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, child in self._children():
            if isinstance(child, Module):
                yield from child.modules()

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def train(self, mode: bool = True) -> "Module":
        for mod in self.modules():
            mod.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def set_rng(self, rng: np.random.Generator | None) -> None:
        """Hand a random stream to every dropout layer below this module."""
        for mod in self.modules():
            if isinstance(mod, Dropout):
                mod.rng = rng

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"state is missing parameters: {sorted(missing)}")
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ValueError(f"{name}: shape {value.shape} != {p.shape}")
            p.data = value.astype(p.data.dtype, copy=True)


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True):
        self.weight = Parameter(truncated_normal(rng, (in_dim, out_dim)))
        self.bias = Parameter(np.zeros(out_dim)) if bias else None
        self.in_dim, self.out_dim = in_dim, out_dim

    def forward(self, x) -> Tensor:
        y = ag.matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class Embedding(Module):
    def __init__(self, num: int, dim: int, rng: np.random.Generator):
        self.weight = Parameter(truncated_normal(rng, (num, dim)))

    def forward(self, indices) -> Tensor:
        return ag.take_rows(self.weight, indices)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-6):
        self.weight = Parameter(np.ones(dim))
        self.bias = Parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x) -> Tensor:
        return ag.layer_norm(x, self.weight, self.bias, self.eps)


class Dropout(Module):
    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ConfigurationError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self.rng: np.random.Generator | None = None

    def forward(self, x) -> Tensor:
        return ag.dropout(x, self.rate, self.rng, self.training)


class MLP(Module):
    """``depth`` GELU layers of width ``width``; no residuals."""

    def __init__(self, in_dim: int, width: int, depth: int, rng: np.random.Generator):
        self.layers = []
        dim = in_dim
        for _ in range(depth):
            self.layers.append(Linear(dim, width, rng))
            dim = width
        self.out_dim = dim

    def forward(self, x) -> Tensor:
        for layer in self.layers:
            x = ag.gelu(layer(x))
        return x


class MultiHeadAttention(Module):
    """Scaled dot-product self-attention over ``(batch, length, dim)`` inputs."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator, dropout: float = 0.0):
        if heads < 1 or dim % heads:
            raise ConfigurationError(f"hidden size {dim} is not divisible by {heads} heads")
        self.dim, self.heads = dim, heads
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng)
        self.value = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)
        self.attn_drop = Dropout(dropout)
        self.last_weights: np.ndarray | None = None

    def _split(self, x, b, length):
        hd = self.dim // self.heads
        return ag.transpose(ag.reshape(x, (b, length, self.heads, hd)), (0, 2, 1, 3))

    def forward(self, x, causal: bool = False, key_mask: np.ndarray | None = None) -> Tensor:
        b, length, _ = x.shape
        q = self._split(self.query(x), b, length)
        k = self._split(self.key(x), b, length)
        v = self._split(self.value(x), b, length)
        scores = ag.matmul(q, ag.swapaxes(k, -1, -2)) / np.sqrt(self.dim // self.heads)

        allowed = np.ones((b, 1, length, length), dtype=bool)
        if causal:
            allowed &= np.tril(np.ones((length, length), dtype=bool))
        if key_mask is not None:
            allowed &= np.asarray(key_mask, dtype=bool)[:, None, None, :]
        if not allowed.all():
            scores = ag.where(allowed, scores, _MASK_FILL)
        weights = ag.softmax(scores, axis=-1)
        self.last_weights = weights.data
        ctx = ag.matmul(self.attn_drop(weights), v)
        ctx = ag.reshape(ag.transpose(ctx, (0, 2, 1, 3)), (b, length, self.dim))
        return self.out(ctx)


class FeedForward(Module):
    def __init__(self, dim: int, rng: np.random.Generator, inner: int | None = None):
        inner = inner or 4 * dim
        self.up = Linear(dim, inner, rng)
        self.down = Linear(inner, dim, rng)

    def forward(self, x) -> Tensor:
        return self.down(ag.gelu(self.up(x)))


class TransformerBlock(Module):
    """Pre-norm block: ``x + attn(ln(x))`` then ``h + ffn(ln(h))``."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator, dropout: float = 0.0):
        self.attn = MultiHeadAttention(dim, heads, rng, dropout)
        self.ffn = FeedForward(dim, rng)
        self.ln_attn = LayerNorm(dim)
        self.ln_ffn = LayerNorm(dim)
        self.drop_attn = Dropout(dropout)
        self.drop_ffn = Dropout(dropout)

    def forward(self, x, causal: bool = False, key_mask: np.ndarray | None = None) -> Tensor:
        squeeze = x.ndim == 2
        if squeeze:
            x = ag.reshape(x, (1,) + x.shape)
            key_mask = None if key_mask is None else np.asarray(key_mask)[None]
        h = x + self.drop_attn(self.attn(self.ln_attn(x), causal=causal, key_mask=key_mask))
        h = h + self.drop_ffn(self.ffn(self.ln_ffn(h)))
        return ag.reshape(h, h.shape[1:]) if squeeze else h


def attention_block(
    x,
    causal_mask: bool,
    heads: int,
    rng: np.random.Generator | None = None,
    block: TransformerBlock | None = None,
) -> Tensor:
    """Run one pre-norm transformer block over ``x`` (``L×d`` or ``B×L×d``).

    A fresh block is initialised from ``rng`` when ``block`` is not given.
    """
    x = ag.as_tensor(x)
    dim = x.shape[-1]
    if block is None:
        block = TransformerBlock(dim, heads, rng if rng is not None else np.random.default_rng(0))
    elif block.attn.heads != heads:
        raise ConfigurationError("block head count does not match `heads`")
    return block(x, causal=causal_mask)
