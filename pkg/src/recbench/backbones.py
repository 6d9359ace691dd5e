"""User-side architectures: causal sequence model (SASRec) and two-tower (DSSM)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .encoders import ItemEncoder
from .errors import ShapeError
from .nn import Dropout, Embedding, LayerNorm, MLP, Module, TransformerBlock

PAD_ITEM = -1


@dataclass
class SasrecSpec:
    dim: int = 64
    blocks: int = 2
    heads: int = 2
    max_len: int = 22
    dropout: float = 0.1


@dataclass
class DssmSpec:
    dim: int = 64
    tower_layers: int = 0


def left_pad(seqs, length: int) -> np.ndarray:
    """Right-align sequences in a ``PAD_ITEM``-filled matrix, keeping the most recent items."""
    out = np.full((len(seqs), length), PAD_ITEM, dtype=np.int64)
    for row, s in enumerate(seqs):
        s = np.asarray(s)[-length:] if length else np.asarray(s)[:0]
        if len(s):
            out[row, length - len(s):] = s
    return out


def score(user_vec, item_vec) -> Tensor:
    """Dot-product matching score; no sigmoid."""
    u, v = ag.as_tensor(user_vec), ag.as_tensor(item_vec)
    if u.shape[-1] != v.shape[-1]:
        raise ShapeError(f"score needs equal widths, got {u.shape} and {v.shape}")
    return ag.tsum(u * v, axis=-1)


def score_all(user_vecs: np.ndarray, item_matrix: np.ndarray) -> np.ndarray:
    """Raw scores of every user against every item, ``users × items``."""
    return np.asarray(user_vecs) @ np.asarray(item_matrix).T


class Recommender(Module):
    """Shared surface: an item encoder plus a way to turn history into user vectors."""

    item_encoder: ItemEncoder
    kind: str

    def user_vectors(self, users: np.ndarray, histories: list[np.ndarray]) -> Tensor:
        raise NotImplementedError

    def score_users(self, users, histories, item_matrix: np.ndarray | None = None) -> np.ndarray:
        with ag.no_grad():
            if item_matrix is None:
                item_matrix = self.item_encoder.all_items().data
            return score_all(self.user_vectors(np.asarray(users), histories).data, item_matrix)


class SASRec(Recommender):
    kind = "sasrec"

    def __init__(self, item_encoder: ItemEncoder, spec: SasrecSpec, rng: np.random.Generator):
        if item_encoder.dim != spec.dim:
            raise ShapeError(f"item encoder width {item_encoder.dim} != hidden size {spec.dim}")
        self.spec = spec
        self.item_encoder = item_encoder
        self.positions = Embedding(spec.max_len, spec.dim, rng)
        self.input_drop = Dropout(spec.dropout)
        self.blocks = [TransformerBlock(spec.dim, spec.heads, rng, spec.dropout)
                       for _ in range(spec.blocks)]
        self.norm = LayerNorm(spec.dim)

    def states_from_vectors(self, item_vecs, pad_mask: np.ndarray) -> Tensor:
        """Hidden state per position for ``B×L×d`` item vectors; pad rows come out as zeros."""
        item_vecs = ag.as_tensor(item_vecs)
        squeeze = item_vecs.ndim == 2
        if squeeze:
            item_vecs = ag.reshape(item_vecs, (1,) + item_vecs.shape)
            pad_mask = np.asarray(pad_mask)[None]
        b, length, _ = item_vecs.shape
        if length > self.spec.max_len:
            raise ShapeError(f"sequence length {length} exceeds positional table {self.spec.max_len}")
        valid = ~np.asarray(pad_mask, dtype=bool)
        keep = valid[..., None].astype(item_vecs.data.dtype)
        pos = self.positions(np.arange(self.spec.max_len - length, self.spec.max_len))
        h = self.input_drop(item_vecs + pos) * keep
        for block in self.blocks:
            h = block(h, causal=True, key_mask=valid) * keep
        h = self.norm(h) * keep
        return ag.reshape(h, h.shape[1:]) if squeeze else h

    def forward(self, item_seqs: np.ndarray) -> Tensor:
        """States for a ``B×L`` matrix of item indices padded with ``PAD_ITEM``."""
        item_seqs = np.asarray(item_seqs, dtype=np.int64)
        pad = item_seqs == PAD_ITEM
        vecs = self.item_encoder(np.where(pad, 0, item_seqs))
        return self.states_from_vectors(vecs, pad)

    def user_vectors(self, users, histories) -> Tensor:
        seqs = left_pad(histories, self.spec.max_len)
        return self.forward(seqs)[:, -1, :]


def sasrec_user_states(model: SASRec, item_vec_seq, pad_mask) -> Tensor:
    return model.states_from_vectors(item_vec_seq, pad_mask)


class DSSM(Recommender):
    kind = "dssm"

    def __init__(self, item_encoder: ItemEncoder, n_users: int, spec: DssmSpec,
                 rng: np.random.Generator):
        if item_encoder.dim != spec.dim:
            raise ShapeError(f"item encoder width {item_encoder.dim} != hidden size {spec.dim}")
        self.spec = spec
        self.n_users = n_users
        self.item_encoder = item_encoder
        self.users = Embedding(n_users, spec.dim, rng)
        self.tower = MLP(spec.dim, spec.dim, spec.tower_layers, rng)

    def forward(self, users) -> Tensor:
        users = np.asarray(users, dtype=np.int64)
        if users.size and (users.min() < 0 or users.max() >= self.n_users):
            raise IndexError(f"user index out of range [0, {self.n_users})")
        return self.tower(self.users(users))

    def user_vectors(self, users, histories=None) -> Tensor:
        return self.forward(users)


def dssm_user_vector(model: DSSM, user_index: int) -> Tensor:
    return model(np.array([user_index]))[0]
