"""Item encoders: every one maps item indices to ``d``-dimensional vectors.

Swapping one encoder for another never changes the shapes a backbone sees,
which is what lets the same backbone run as an ID model or a content model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Parameter, Tensor
from .catalog import CLS_ID, MASK_ID, PAD_ID, ItemTable
from .errors import ConfigurationError, ContractError, ShapeError
from .nn import Embedding, LayerNorm, Linear, MLP, Module, TransformerBlock
from .optim import AdamW, ParamGroup

ADAPTER_DEPTHS = (0, 2, 4, 6, 8, 10, 12)
FUSION_DEPTHS = (0, 2, 4, 6, 8)


class ItemEncoder(Module):
    """Base class. Subclasses implement :meth:`encode_unique`."""

    dim: int
    n_items: int

    def encode_unique(self, items: np.ndarray) -> Tensor:
        """Vectors for a 1-D array of distinct item indices."""
        raise NotImplementedError

    def forward(self, items) -> Tensor:
        items = np.asarray(items, dtype=np.int64)
        if items.size and (items.min() < 0 or items.max() >= self.n_items):
            raise IndexError(f"item index out of range [0, {self.n_items})")
        uniq, inverse = np.unique(items.reshape(-1), return_inverse=True)
        vecs = self.encode_unique(uniq)
        out = ag.take_rows(vecs, inverse)
        return ag.reshape(out, items.shape + (self.dim,))

    def all_items(self) -> Tensor:
        return self.encode_unique(np.arange(self.n_items))

    def modality_parameters(self) -> list[Parameter]:
        """Parameters of the pre-existing modality network (trained at the encoder rate)."""
        return []


class IdEncoder(ItemEncoder):
    """One trainable row per item."""

    def __init__(self, n_items: int, dim: int, rng: np.random.Generator):
        self.n_items, self.dim = n_items, dim
        self.table = Embedding(n_items, dim, rng)

    def encode_unique(self, items):
        return self.table(items)

    def forward(self, items) -> Tensor:
        items = np.asarray(items, dtype=np.int64)
        if items.size and (items.min() < 0 or items.max() >= self.n_items):
            raise IndexError(f"item index out of range [0, {self.n_items})")
        return self.table(items)


def encode_id(encoder: IdEncoder, item_indices) -> Tensor:
    return encoder(item_indices)


@dataclass
class TextEncoderSpec:
    vocab_size: int
    max_title_len: int = 30
    width: int = 64
    blocks: int = 2
    heads: int = 2
    dropout: float = 0.1


class TextTransformer(Module):
    """Bidirectional transformer over token ids; returns per-token states."""

    def __init__(self, spec: TextEncoderSpec, rng: np.random.Generator):
        self.spec = spec
        self.tokens = Embedding(spec.vocab_size, spec.width, rng)
        self.positions = Embedding(spec.max_title_len + 1, spec.width, rng)
        self.blocks = [TransformerBlock(spec.width, spec.heads, rng, spec.dropout)
                       for _ in range(spec.blocks)]
        self.norm = LayerNorm(spec.width)

    def forward(self, token_ids: np.ndarray) -> Tensor:
        token_ids = np.asarray(token_ids, dtype=np.int64)
        b, length = token_ids.shape
        if length > self.spec.max_title_len + 1:
            raise ShapeError(f"sequence of {length} tokens exceeds the positional table "
                             f"({self.spec.max_title_len + 1})")
        key_mask = token_ids != PAD_ID
        h = self.tokens(token_ids) + self.positions(np.arange(length))
        for block in self.blocks:
            h = block(h, causal=False, key_mask=key_mask)
        return self.norm(h)


class TextEncoder(ItemEncoder):
    """Title tokens → transformer → [CLS] state → affine DT-layer to ``d``."""

    def __init__(self, tokens: np.ndarray, dim: int, spec: TextEncoderSpec,
                 rng: np.random.Generator):
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.ndim != 2 or (tokens[:, 0] != CLS_ID).any():
            raise ContractError("token matrix must be 2-D with [CLS] in column 0")
        if tokens.max() >= spec.vocab_size:
            raise ContractError("token id exceeds vocabulary size")
        self.item_tokens = tokens
        self.n_items, self.dim = tokens.shape[0], dim
        self.transformer = TextTransformer(spec, rng)
        self.dt_layer = Linear(spec.width, dim, rng)

    def encode_tokens(self, token_ids: np.ndarray) -> Tensor:
        token_ids = np.asarray(token_ids, dtype=np.int64)
        # trim shared right padding
        used = np.flatnonzero((token_ids != PAD_ID).any(axis=0))
        token_ids = token_ids[:, : used[-1] + 1]
        states = self.transformer(token_ids)
        return self.dt_layer(states[:, 0, :])

    def encode_unique(self, items):
        return self.encode_tokens(self.item_tokens[items])

    def modality_parameters(self):
        return self.transformer.parameters()


def encode_text(encoder: TextEncoder, token_seqs) -> Tensor:
    return encoder.encode_tokens(token_seqs)


class FrozenFeatureEncoder(ItemEncoder):
    """Two-stage pathway: fixed feature vectors → ``depth`` GELU layers → DT-layer.

    The feature matrix is a plain array, so it never receives a gradient.
    """

    def __init__(self, features: np.ndarray, dim: int, depth: int, rng: np.random.Generator):
        if depth < 0:
            raise ConfigurationError("adapter depth must be non-negative")
        self.features = np.array(features, dtype=ag.get_default_dtype())
        self.features.flags.writeable = False
        self.n_items, self.in_dim = self.features.shape
        self.dim, self.depth = dim, depth
        self.adapter = MLP(self.in_dim, dim, depth, rng)
        self.dt_layer = Linear(self.adapter.out_dim, dim, rng)

    def encode_features(self, feature_vecs) -> Tensor:
        x = ag.as_tensor(np.asarray(feature_vecs.data if isinstance(feature_vecs, Tensor)
                                    else feature_vecs))
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"feature width {x.shape[-1]} != adapter input width {self.in_dim}")
        return self.dt_layer(self.adapter(x))

    def encode_unique(self, items):
        return self.encode_features(self.features[items])


def encode_frozen(encoder: FrozenFeatureEncoder, feature_vecs) -> Tensor:
    return encoder.encode_features(feature_vecs)


class LinearFeatureEncoder(ItemEncoder):
    """End-to-end counterpart of the frozen pathway: a trainable linear map over the features."""

    def __init__(self, features: np.ndarray, dim: int, rng: np.random.Generator, width: int | None = None):
        self.features = np.array(features, dtype=ag.get_default_dtype())
        self.n_items, in_dim = self.features.shape
        self.dim = dim
        width = width or dim
        self.extractor = Linear(in_dim, width, rng)
        self.dt_layer = Linear(width, dim, rng)

    def encode_unique(self, items):
        return self.dt_layer(self.extractor(self.features[items]))

    def modality_parameters(self):
        return self.extractor.parameters()


@dataclass
class FusionSpec:
    mode: str = "add"
    depth: int = 0

    def __post_init__(self):
        self.mode = self.mode.lower()
        if self.mode not in ("add", "con"):
            raise ConfigurationError(f"fusion mode must be ADD or CON, got {self.mode!r}")
        if self.depth < 0:
            raise ConfigurationError("fusion depth must be non-negative")


class Fusion(Module):
    """Combine an ID vector and a modality vector into one ``d``-vector."""

    def __init__(self, dim: int, spec: FusionSpec, rng: np.random.Generator):
        self.spec, self.dim = spec, dim
        self.project = Linear(2 * dim, dim, rng) if spec.mode == "con" else None
        self.stack = MLP(dim, dim, spec.depth, rng)

    def forward(self, id_vec, mo_vec) -> Tensor:
        id_vec, mo_vec = ag.as_tensor(id_vec), ag.as_tensor(mo_vec)
        if self.spec.mode == "add":
            if id_vec.shape != mo_vec.shape:
                raise ShapeError(f"ADD fusion needs equal shapes, got {id_vec.shape} and {mo_vec.shape}")
            h = id_vec + mo_vec
        else:
            if id_vec.shape[-1] != self.dim or mo_vec.shape[-1] != self.dim:
                raise ShapeError("CON fusion needs two d-dimensional inputs")
            h = self.project(ag.concat([id_vec, mo_vec], axis=-1))
        return self.stack(h)


def fuse(id_vec, mo_vec, spec: FusionSpec, rng: np.random.Generator | None = None,
         fusion: Fusion | None = None) -> Tensor:
    """Functional form of :class:`Fusion`; builds fresh layers from ``rng`` when needed."""
    if fusion is None:
        dim = np.shape(id_vec.data if isinstance(id_vec, Tensor) else id_vec)[-1]
        fusion = Fusion(dim, spec, rng if rng is not None else np.random.default_rng(0))
    return fusion(id_vec, mo_vec)


class FusedEncoder(ItemEncoder):
    """ID embedding fused with a modality encoder."""

    def __init__(self, id_encoder: IdEncoder, modality: ItemEncoder, spec: FusionSpec,
                 rng: np.random.Generator):
        if id_encoder.dim != modality.dim or id_encoder.n_items != modality.n_items:
            raise ShapeError("ID and modality encoders must agree on item count and width")
        self.n_items, self.dim = id_encoder.n_items, id_encoder.dim
        self.id_encoder = id_encoder
        self.modality = modality
        self.fusion = Fusion(self.dim, spec, rng)

    def encode_unique(self, items):
        return self.fusion(self.id_encoder.table(items), self.modality.encode_unique(items))

    def modality_parameters(self):
        return self.modality.modality_parameters()


# ---------------------------------------------------------------------------
# masked-language-model pre-training
# ---------------------------------------------------------------------------

def mask_tokens(tokens: np.ndarray, mask_prob: float, rng: np.random.Generator):
    """Replace a ``mask_prob`` share of ordinary tokens with [MASK]; returns (inputs, mask)."""
    ordinary = tokens > MASK_ID
    chosen = ordinary & (rng.random(tokens.shape) < mask_prob)
    inputs = np.where(chosen, MASK_ID, tokens)
    return inputs, chosen


def mlm_loss(transformer: TextTransformer, head: Linear, tokens: np.ndarray,
             masked: np.ndarray, inputs: np.ndarray) -> Tensor | None:
    """Mean cross-entropy over masked positions; None when nothing is masked."""
    if not masked.any():
        return None
    states = transformer(inputs)
    rows, cols = np.nonzero(masked)
    picked = states[rows, cols]
    logp = ag.log_softmax(head(picked), axis=-1)
    return -ag.mean(logp[np.arange(len(rows)), tokens[rows, cols]])


def mlm_pretrain(encoder: TextEncoder, corpus: np.ndarray | None = None, mask_prob: float = 0.15,
                 epochs: int = 20, seed: int = 0, lr: float = 1e-3, batch_size: int = 64,
                 weight_decay: float = 0.01) -> list[float]:
    """Train ``encoder.transformer`` with a masked-token objective, in place.

    ``corpus`` is a CLS-prefixed token matrix (defaults to the encoder's own
    item titles). Returns the mean loss of each epoch.
    """
    tokens = encoder.item_tokens if corpus is None else np.asarray(corpus, dtype=np.int64)
    if len(tokens) == 0 or not (tokens > MASK_ID).any():
        raise ContractError("MLM corpus has no ordinary tokens")
    if not 0.0 < mask_prob < 1.0:
        raise ValueError("mask_prob must lie strictly between 0 and 1")
    transformer = encoder.transformer
    head = Linear(transformer.spec.width, transformer.spec.vocab_size, np.random.default_rng([seed, 1]))
    opt = AdamW([ParamGroup(transformer.parameters() + head.parameters(), lr, weight_decay, "mlm")])
    transformer.train()
    history = []
    for epoch in range(epochs):
        order = np.random.default_rng([seed, 2, epoch]).permutation(len(tokens))
        total, batches = 0.0, 0
        for start in range(0, len(order), batch_size):
            rng = np.random.default_rng([seed, 3, epoch, start])
            batch = tokens[order[start:start + batch_size]]
            inputs, masked = mask_tokens(batch, mask_prob, rng)
            transformer.set_rng(rng)
            loss = mlm_loss(transformer, head, batch, masked, inputs)
            if loss is None:
                continue
            opt.zero_grad()
            ag.backward(loss)
            # the head and unused embeddings may receive no gradient in a batch
            for p in transformer.parameters() + head.parameters():
                if p.grad is None:
                    p.grad = np.zeros_like(p.data)
            opt.step()
            total += loss.item()
            batches += 1
        history.append(total / max(batches, 1))
    transformer.set_rng(None)
    return history
