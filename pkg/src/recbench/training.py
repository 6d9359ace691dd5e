"""Pairwise BCE training with sampled negatives for both backbones."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .backbones import DSSM, PAD_ITEM, SASRec, Recommender, left_pad
from .catalog import DatasetSplit
from .errors import ConfigurationError, SamplingError
from .evaluation import evaluate
from .optim import AdamW, ParamGroup

log = logging.getLogger(__name__)


@dataclass
class HyperParams:
    lr: float = 1e-3                 # rest of the model
    lr_modality: float | None = None  # modality encoder; None → same as lr
    batch_size: int = 128
    weight_decay: float = 0.01
    dropout: float = 0.1
    dim: int = 64
    epochs: int = 30
    seed: int = 0
    patience: int = 5
    eval_n: int = 10
    negatives: int = 1
    collapse_eps: float = 1.0

    def __post_init__(self):
        if self.lr_modality is None:
            self.lr_modality = self.lr
        if self.lr < 0 or self.lr_modality < 0:
            raise ConfigurationError("learning rates must be non-negative")
        if self.batch_size < 1 or self.dim < 1 or self.epochs < 1 or self.negatives < 1:
            raise ConfigurationError("batch size, width, epochs and negatives must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("dropout must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigurationError("weight decay must be non-negative")


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_hr: float
    val_ndcg: float
    seconds: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    num_parameters: int = 0
    collapsed: bool = False
    collapse_epoch: int | None = None
    best_epoch: int | None = None
    best_val_hr: float = -1.0

    @property
    def val_hr(self) -> list[float]:
        return [e.val_hr for e in self.epochs]

    @property
    def losses(self) -> list[float]:
        return [e.loss for e in self.epochs]

    @property
    def seconds_per_epoch(self) -> float:
        return float(np.mean([e.seconds for e in self.epochs])) if self.epochs else 0.0

    def to_tsv(self, include_time: bool = True) -> str:
        lines = ["# epoch\tloss\tval_hr10\tval_ndcg10\tseconds"]
        for e in self.epochs:
            secs = f"{e.seconds:.3f}" if include_time else "-"
            lines.append(f"{e.epoch}\t{e.loss:.10g}\t{e.val_hr:.6f}\t{e.val_ndcg:.6f}\t{secs}")
        lines.append(
            f"#footer\tcollapsed={int(self.collapsed)}\tcollapse_epoch={self.collapse_epoch}"
            f"\tbest_epoch={self.best_epoch}\tparams={self.num_parameters}"
        )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_tsv(cls, text: str) -> "TrainReport":
        rep = cls()
        for line in text.splitlines():
            if line.startswith("#footer"):
                kv = dict(part.split("=", 1) for part in line.split("\t")[1:])
                rep.collapsed = kv["collapsed"] == "1"
                rep.collapse_epoch = None if kv["collapse_epoch"] == "None" else int(kv["collapse_epoch"])
                rep.best_epoch = None if kv["best_epoch"] == "None" else int(kv["best_epoch"])
                rep.num_parameters = int(kv["params"])
            elif line and not line.startswith("#"):
                ep, loss, hr, ndcg, secs = line.split("\t")
                rep.epochs.append(EpochRecord(int(ep), float(loss), float(hr), float(ndcg),
                                              float("nan") if secs == "-" else float(secs)))
        if rep.epochs:
            rep.best_val_hr = max(e.val_hr for e in rep.epochs)
        return rep


# ---------------------------------------------------------------------------
# negatives
# ---------------------------------------------------------------------------

def sample_negative(user: int, positives, m: int, rng: np.random.Generator) -> int:
    """One item drawn uniformly from the items the user has not interacted with."""
    pos = np.unique(np.asarray(positives, dtype=np.int64))
    if len(pos) >= m:
        raise SamplingError(f"user {user} has interacted with all {m} items")
    k = int(rng.integers(0, m - len(pos)))
    # k-th non-positive item: shift past every positive at or below it
    for p in pos:
        if p <= k:
            k += 1
        else:
            break
    return k


def sample_negatives(positive_mask: np.ndarray, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample negatives for each row of ``positive_mask`` (``rows × m`` booleans).

    Output has shape ``(rows,) + shape[1:]``; no draw hits a positive of its row.
    """
    rows, m = positive_mask.shape
    full = positive_mask.all(axis=1)
    if full.any():
        raise SamplingError(f"user row {int(np.argmax(full))} has interacted with all {m} items")
    out = rng.integers(0, m, size=shape)
    row_idx = np.broadcast_to(np.arange(rows).reshape((rows,) + (1,) * (len(shape) - 1)), shape)
    bad = positive_mask[row_idx, out]
    while bad.any():
        out[bad] = rng.integers(0, m, size=int(bad.sum()))
        bad = positive_mask[row_idx, out]
    return out


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def bce_pair_loss(pos_score, neg_score) -> Tensor:
    """-log σ(pos) - log(1 - σ(neg)), elementwise, via softplus."""
    return ag.softplus(-ag.as_tensor(pos_score)) + ag.softplus(neg_score)


def seq2seq_terms(states, pos_vecs, neg_vecs) -> Tensor:
    """Per-position pair losses for ``B×L×d`` states and item vectors."""
    pos = ag.tsum(ag.as_tensor(states) * pos_vecs, axis=-1)
    neg = ag.tsum(ag.as_tensor(states) * neg_vecs, axis=-1)
    return bce_pair_loss(pos, neg)


def seq2seq_loss(states, pos_vecs, neg_vecs, pad_mask: np.ndarray, reduction: str = "mean") -> Tensor | None:
    """Sum (or mean) of pair losses over non-pad prediction positions; None if all are padded.

    ``pad_mask`` is True where the position has no target.
    """
    keep = ~np.asarray(pad_mask, dtype=bool)
    count = int(keep.sum())
    if count == 0:
        return None
    terms = seq2seq_terms(states, pos_vecs, neg_vecs)
    total = ag.tsum(terms * keep.astype(terms.data.dtype))
    if reduction == "sum":
        return total
    if reduction == "mean":
        return total / float(count)
    raise ValueError(f"unknown reduction {reduction!r}")


def pair_loss(user_vecs, pos_vecs, neg_vecs) -> Tensor:
    """Mean pair loss over a batch of ``<u, i, j>`` triples."""
    u = ag.as_tensor(user_vecs)
    return ag.mean(bce_pair_loss(ag.tsum(u * pos_vecs, axis=-1), ag.tsum(u * neg_vecs, axis=-1)))


# ---------------------------------------------------------------------------
# optimiser groups and collapse detection
# ---------------------------------------------------------------------------

def build_optimizer_groups(model: Recommender, hp: HyperParams) -> list[ParamGroup]:
    """Modality-encoder parameters at ``lr_modality``; everything else at ``lr``."""
    modality = model.item_encoder.modality_parameters()
    mod_ids = {id(p) for p in modality}
    if len(mod_ids) != len(modality):
        raise ConfigurationError("a modality parameter is listed twice")
    named = list(model.named_parameters())
    for name, p in named:
        if p.name is None:
            p.name = name
    rest = [p for _, p in named if id(p) not in mod_ids]
    if len(rest) + len(modality) != len(named):
        raise ConfigurationError("modality parameters are not all owned by the model")
    groups = [ParamGroup(rest, hp.lr, hp.weight_decay, "rest")]
    if modality:
        groups.append(ParamGroup(modality, hp.lr_modality, hp.weight_decay, "modality"))
    return groups


def collapse_monitor(val_hr: list[float], n_items: int, n: int = 10, eps: float = 1.0,
                     losses: list[float] | None = None) -> bool:
    """True once validation HR falls below ``eps``× the random baseline after exceeding 2× it,
    or as soon as any loss is NaN."""
    if losses and any(math.isnan(x) for x in losses):
        return True
    baseline = n / n_items
    peaked = False
    for hr in val_hr:
        if peaked and hr < eps * baseline:
            return True
        peaked = peaked or hr > 2 * baseline
    return False


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

def _positive_mask(split: DatasetSplit, users: np.ndarray) -> np.ndarray:
    mask = np.zeros((len(users), split.n_items), dtype=bool)
    for row, u in enumerate(users):
        mask[row, split.train[u]] = True
    return mask


def _sasrec_batch(model: SASRec, split: DatasetSplit, users: np.ndarray, rng, negatives: int):
    length = model.spec.max_len
    inputs = left_pad([split.train[u][:-1] for u in users], length)
    targets = left_pad([split.train[u][1:] for u in users], length)
    pad = targets == PAD_ITEM
    if pad.all():
        return None
    pos_mask = _positive_mask(split, users)
    neg = sample_negatives(pos_mask, (len(users), negatives, length), rng)
    # one encoder call covers inputs, positives and negatives
    stacked = np.concatenate([inputs[None], targets[None], np.moveaxis(neg, 1, 0)], axis=0)
    vecs = model.item_encoder(np.where(stacked == PAD_ITEM, 0, stacked))
    states = model.states_from_vectors(vecs[0], inputs == PAD_ITEM)
    pos_vecs = vecs[1]
    losses = [seq2seq_loss(states, pos_vecs, vecs[2 + k], pad) for k in range(negatives)]
    return losses[0] if negatives == 1 else sum(losses[1:], losses[0]) / float(negatives)


def _dssm_batch(model: DSSM, split: DatasetSplit, users, items, rng, negatives: int):
    uniq, inv = np.unique(users, return_inverse=True)
    pos_mask = _positive_mask(split, uniq)[inv]
    neg = sample_negatives(pos_mask, (len(users), negatives), rng)
    vecs = model.item_encoder(np.concatenate([items[:, None], neg], axis=1))
    u = model(users)
    losses = [pair_loss(u, vecs[:, 0], vecs[:, 1 + k]) for k in range(negatives)]
    return losses[0] if negatives == 1 else sum(losses[1:], losses[0]) / float(negatives)


def _batches(model: Recommender, split: DatasetSplit, hp: HyperParams, epoch: int):
    order_rng = np.random.default_rng([hp.seed, 1, epoch])
    if isinstance(model, SASRec):
        users = order_rng.permutation(split.n_users)
        users = users[[len(split.train[u]) >= 2 for u in users]]
        for k, start in enumerate(range(0, len(users), hp.batch_size)):
            yield k, ("sasrec", users[start:start + hp.batch_size])
    else:
        u = np.concatenate([np.full(len(s), i) for i, s in enumerate(split.train)]).astype(np.int64)
        it = np.concatenate(split.train).astype(np.int64)
        perm = order_rng.permutation(len(u))
        u, it = u[perm], it[perm]
        for k, start in enumerate(range(0, len(u), hp.batch_size)):
            yield k, ("dssm", u[start:start + hp.batch_size], it[start:start + hp.batch_size])


def train(model: Recommender, split: DatasetSplit, hp: HyperParams, on_epoch=None,
          on_best=None) -> TrainReport:
    """Optimise ``model`` on ``split.train``; validates every epoch and keeps the best weights.

    ``on_epoch(record)`` is called after each epoch; ``on_best(model, epoch)``
    whenever validation HR@N improves.
    """
    groups = build_optimizer_groups(model, hp)
    opt = AdamW(groups)
    report = TrainReport(num_parameters=model.num_parameters())
    best_state = None
    stale = 0
    for epoch in range(1, hp.epochs + 1):
        t0 = time.perf_counter()
        model.train()
        total, batches = 0.0, 0
        nan_seen = False
        for k, batch in _batches(model, split, hp, epoch):
            rng = np.random.default_rng([hp.seed, 2, epoch, k])
            model.set_rng(rng)
            if batch[0] == "sasrec":
                loss = _sasrec_batch(model, split, batch[1], rng, hp.negatives)
            else:
                loss = _dssm_batch(model, split, batch[1], batch[2], rng, hp.negatives)
            if loss is None:
                continue
            value = loss.item()
            if not math.isfinite(value):
                ag.default_tape().reset()
                nan_seen = True
                break
            opt.zero_grad()
            ag.backward(loss)
            opt.step()
            total += value
            batches += 1
        model.set_rng(None)
        if nan_seen:
            report.epochs.append(EpochRecord(epoch, float("nan"), 0.0, 0.0, time.perf_counter() - t0))
            report.collapsed, report.collapse_epoch = True, epoch
            log.warning("non-finite loss at epoch %d; aborting", epoch)
            break
        val = evaluate(model, split, n=hp.eval_n, stage="valid")
        rec = EpochRecord(epoch, total / max(batches, 1), val.groups["regular"].hr,
                          val.groups["regular"].ndcg, time.perf_counter() - t0)
        report.epochs.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
        if not report.collapsed and collapse_monitor(report.val_hr, split.n_items, hp.eval_n, hp.collapse_eps):
            report.collapsed, report.collapse_epoch = True, epoch
        if rec.val_hr > report.best_val_hr:
            report.best_val_hr, report.best_epoch = rec.val_hr, epoch
            best_state = model.state_dict()
            stale = 0
            if on_best is not None:
                on_best(model, epoch)
        else:
            stale += 1
            if stale >= hp.patience:
                break
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return report


def hyperparams_dict(hp: HyperParams) -> dict:
    return asdict(hp)
