"""Interaction logs, item payloads and the split protocols built from them."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, EmptyInputError, ParseError

PAD_ID, UNK_ID, CLS_ID, MASK_ID = 0, 1, 2, 3
SPECIAL_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[MASK]")
MAX_TITLE_TOKENS = 30


@dataclass
class InteractionLog:
    """Chronological item sequences per user.

    ``sequences[u]`` and ``timestamps[u]`` are parallel int64 arrays.
    ``user_keys``/``item_keys`` map dense indices back to the source keys.
    """

    sequences: list[np.ndarray]
    timestamps: list[np.ndarray]
    n_items: int
    user_keys: list = field(default_factory=list)
    item_keys: list = field(default_factory=list)

    def __post_init__(self):
        if not self.user_keys:
            self.user_keys = list(range(len(self.sequences)))
        if not self.item_keys:
            self.item_keys = list(range(self.n_items))

    @property
    def n_users(self) -> int:
        return len(self.sequences)

    @property
    def num_interactions(self) -> int:
        return int(sum(len(s) for s in self.sequences))

    def item_counts(self) -> np.ndarray:
        if not self.sequences:
            return np.zeros(self.n_items, dtype=np.int64)
        return np.bincount(np.concatenate(self.sequences), minlength=self.n_items)

    def validate(self) -> None:
        for u, (seq, ts) in enumerate(zip(self.sequences, self.timestamps)):
            if len(seq) != len(ts):
                raise ContractError(f"user {u}: items and timestamps differ in length")
            if len(ts) and np.any(np.diff(ts) < 0):
                raise ContractError(f"user {u}: timestamps decrease")
            if len(seq) and (seq.min() < 0 or seq.max() >= self.n_items):
                raise ContractError(f"user {u}: item index outside [0, {self.n_items})")
            pairs = set(zip(seq.tolist(), ts.tolist()))
            if len(pairs) != len(seq):
                raise ContractError(f"user {u}: duplicate (item, timestamp) pair")


@dataclass
class DatasetSplit:
    """Leave-one-out split: per-user train prefix, one validation and one test item."""

    train: list[np.ndarray]
    valid: np.ndarray
    test: np.ndarray
    n_items: int

    @property
    def n_users(self) -> int:
        return len(self.train)

    def train_counts(self) -> np.ndarray:
        if not self.train:
            return np.zeros(self.n_items, dtype=np.int64)
        return np.bincount(np.concatenate(self.train), minlength=self.n_items)

    def history(self, user: int, stage: str) -> np.ndarray:
        """Items visible when predicting ``stage`` ('valid' or 'test')."""
        if stage == "valid":
            return self.train[user]
        if stage == "test":
            return np.append(self.train[user], self.valid[user])
        raise ValueError(f"unknown stage {stage!r}")

    def targets(self, stage: str) -> np.ndarray:
        return {"valid": self.valid, "test": self.test}[stage]


@dataclass
class ItemTable:
    """Modality payload per item: CLS-prefixed token ids and/or a dense feature vector."""

    n_items: int
    tokens: np.ndarray | None = None
    features: np.ndarray | None = None
    titles: list[str] | None = None
    vocab: "Vocabulary | None" = None

    def subset(self, old_indices: Sequence[int]) -> "ItemTable":
        idx = np.asarray(old_indices, dtype=np.int64)
        return ItemTable(
            n_items=len(idx),
            tokens=None if self.tokens is None else self.tokens[idx],
            features=None if self.features is None else self.features[idx],
            titles=None if self.titles is None else [self.titles[i] for i in idx],
            vocab=self.vocab,
        )


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def _data_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield line_no, line


def load_interactions(path, schema: tuple[int, int, int] = (0, 1, 2)) -> InteractionLog:
    """Read ``user<TAB>item<TAB>timestamp`` rows into a densely indexed log.

    ``schema`` gives the column positions of user key, item key and timestamp.
    Exact duplicate rows are dropped; ties in timestamp keep file order.
    """
    path = Path(path)
    ucol, icol, tcol = schema
    rows = []
    seen = set()
    for line_no, line in _data_lines(path):
        cols = line.split("\t")
        if len(cols) <= max(schema):
            raise ParseError(path, line_no, f"expected {max(schema) + 1} tab-separated columns")
        try:
            ts = int(cols[tcol])
        except ValueError:
            raise ParseError(path, line_no, f"timestamp {cols[tcol]!r} is not an integer") from None
        key = (cols[ucol], cols[icol], ts)
        if key in seen:
            continue
        seen.add(key)
        rows.append(key)
    if not rows:
        raise EmptyInputError(f"{path}: no interactions")

    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    per_user: list[list[tuple[int, int]]] = []
    for ukey, ikey, ts in rows:
        u = user_index.setdefault(ukey, len(user_index))
        if u == len(per_user):
            per_user.append([])
        i = item_index.setdefault(ikey, len(item_index))
        per_user[u].append((ts, i))
    sequences, timestamps = [], []
    for events in per_user:
        events.sort(key=lambda e: e[0])  # stable: file order breaks ties
        timestamps.append(np.array([e[0] for e in events], dtype=np.int64))
        sequences.append(np.array([e[1] for e in events], dtype=np.int64))
    return InteractionLog(sequences, timestamps, len(item_index), list(user_index), list(item_index))


def load_items(path, item_keys: Sequence, vocab: "Vocabulary | None" = None,
               max_title_len: int = MAX_TITLE_TOKENS) -> ItemTable:
    """Read ``item<TAB>title<TAB>features`` rows aligned to ``item_keys``.

    Items absent from the file get an empty title and a zero feature vector.
    A vocabulary is built from the titles when none is given.
    """
    path = Path(path)
    titles: dict[str, str] = {}
    feats: dict[str, np.ndarray] = {}
    for line_no, line in _data_lines(path):
        cols = line.split("\t")
        key = cols[0]
        if len(cols) > 1 and cols[1]:
            titles[key] = cols[1]
        if len(cols) > 2 and cols[2].strip():
            try:
                feats[key] = np.array([float(v) for v in cols[2].split(",")])
            except ValueError:
                raise ParseError(path, line_no, "feature vector is not comma-separated floats") from None
    keys = [str(k) for k in item_keys]
    table = ItemTable(n_items=len(keys))
    if titles:
        table.titles = [titles.get(k, "") for k in keys]
        if vocab is None:
            vocab = Vocabulary.build(table.titles)
        table.vocab = vocab
        table.tokens = vocab.encode_batch(table.titles, max_title_len)
    if feats:
        widths = {len(v) for v in feats.values()}
        if len(widths) != 1:
            raise ParseError(path, 0, f"feature vectors have differing widths {sorted(widths)}")
        width = widths.pop()
        table.features = np.stack([feats.get(k, np.zeros(width)) for k in keys])
    return table


def write_interactions(log: InteractionLog, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# user\titem\ttimestamp\n")
        for u, (seq, ts) in enumerate(zip(log.sequences, log.timestamps)):
            ukey = log.user_keys[u]
            for i, t in zip(seq.tolist(), ts.tolist()):
                fh.write(f"{ukey}\t{log.item_keys[i]}\t{t}\n")


def write_items(items: ItemTable, item_keys: Sequence, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# item\ttitle\tfeature_vec\n")
        for i, key in enumerate(item_keys):
            title = items.titles[i] if items.titles is not None else ""
            feat = ""
            if items.features is not None:
                feat = ",".join(repr(float(v)) for v in items.features[i])
            fh.write(f"{key}\t{title}\t{feat}\n")


# ---------------------------------------------------------------------------
# filtering and splitting
# ---------------------------------------------------------------------------

def _densify(sequences, timestamps, n_items, user_keys, item_keys) -> InteractionLog:
    """Drop empty users and unused items, renumbering both contiguously."""
    keep_users = [u for u, s in enumerate(sequences) if len(s)]
    sequences = [sequences[u] for u in keep_users]
    timestamps = [timestamps[u] for u in keep_users]
    user_keys = [user_keys[u] for u in keep_users]
    used = np.zeros(n_items, dtype=bool)
    for s in sequences:
        used[s] = True
    old_items = np.flatnonzero(used)
    remap = np.full(n_items, -1, dtype=np.int64)
    remap[old_items] = np.arange(len(old_items))
    sequences = [remap[s] for s in sequences]
    return InteractionLog(sequences, timestamps, len(old_items), user_keys,
                          [item_keys[i] for i in old_items])


def filter_min_interactions(log: InteractionLog, k: int = 5) -> InteractionLog:
    """Remove users with fewer than ``k`` interactions."""
    if k < 1:
        raise ValueError("k must be at least 1")
    keep = [len(s) >= k for s in log.sequences]
    return _densify(
        [s if ok else s[:0] for s, ok in zip(log.sequences, keep)],
        log.timestamps, log.n_items, log.user_keys, log.item_keys,
    )


def truncate_user_sequences(log: InteractionLog, max_len: int) -> InteractionLog:
    """Keep each user's ``max_len`` most recent interactions."""
    if max_len < 3:
        raise ValueError("max_len must be at least 3")
    return InteractionLog(
        [s[-max_len:] for s in log.sequences],
        [t[-max_len:] for t in log.timestamps],
        log.n_items, list(log.user_keys), list(log.item_keys),
    )


def warm_k_filter(log: InteractionLog, k: int, min_user_interactions: int = 3) -> InteractionLog:
    """Drop items with fewer than ``k`` interactions in ``log``, then thin users.

    Counts are always taken from the input log, never from the filtered one.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return log
    keep_item = log.item_counts() >= k
    seqs, stamps = [], []
    for s, t in zip(log.sequences, log.timestamps):
        mask = keep_item[s]
        s, t = s[mask], t[mask]
        if len(s) < min_user_interactions:
            s, t = s[:0], t[:0]
        seqs.append(s)
        stamps.append(t)
    return _densify(seqs, stamps, log.n_items, log.user_keys, log.item_keys)


def leave_one_out_split(log: InteractionLog) -> DatasetSplit:
    """Last item of each user to test, second-to-last to validation, rest to train."""
    short = [u for u, s in enumerate(log.sequences) if len(s) < 3]
    if short:
        raise ContractError(f"{len(short)} users have fewer than 3 interactions (first: user {short[0]})")
    return DatasetSplit(
        train=[s[:-2].copy() for s in log.sequences],
        valid=np.array([s[-2] for s in log.sequences], dtype=np.int64),
        test=np.array([s[-1] for s in log.sequences], dtype=np.int64),
        n_items=log.n_items,
    )


@dataclass
class ColdNewPartition:
    """User indices whose test target is a cold, new, or other item."""

    cold: np.ndarray
    new: np.ndarray
    other: np.ndarray


def cold_new_partition(train: Sequence[np.ndarray], targets: np.ndarray, n_items: int,
                       cold_below: int = 10) -> ColdNewPartition:
    """Classify targets by their training-set occurrence count (0 → new, 1..9 → cold)."""
    counts = (np.bincount(np.concatenate(list(train)), minlength=n_items)
              if len(train) else np.zeros(n_items, dtype=np.int64))
    c = counts[np.asarray(targets)]
    users = np.arange(len(targets))
    return ColdNewPartition(
        cold=users[(c >= 1) & (c < cold_below)],
        new=users[c == 0],
        other=users[c >= cold_below],
    )


def popularity_histogram(train: Iterable[np.ndarray], n_items: int) -> np.ndarray:
    """``(item_index, count)`` rows sorted by count descending, ties by index."""
    train = list(train)
    counts = (np.bincount(np.concatenate(train), minlength=n_items)
              if train else np.zeros(n_items, dtype=np.int64))
    order = np.lexsort((np.arange(n_items), -counts))
    return np.column_stack([order, counts[order]])


def write_histogram(hist: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item, count in hist.tolist():
            fh.write(f"{item}\t{count}\n")


# ---------------------------------------------------------------------------
# tokenisation
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def split_words(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    """Word-level vocabulary; ids 0-3 are reserved for pad, unknown, CLS and MASK."""

    def __init__(self, words: Sequence[str]):
        self.itos = list(SPECIAL_TOKENS) + [w for w in words if w not in SPECIAL_TOKENS]
        self.stoi = {w: i for i, w in enumerate(self.itos)}

    def __len__(self):
        return len(self.itos)

    @classmethod
    def build(cls, corpus: Iterable[str], min_count: int = 1) -> "Vocabulary":
        counts = Counter(w for text in corpus for w in split_words(text))
        words = sorted((w for w, c in counts.items() if c >= min_count),
                       key=lambda w: (-counts[w], w))
        return cls(words)

    def id(self, word: str) -> int:
        return self.stoi.get(word, UNK_ID)

    def tokenize(self, title: str, max_len: int = MAX_TITLE_TOKENS) -> list[int]:
        """``[CLS]`` followed by at most ``max_len`` word ids."""
        ids = [self.id(w) for w in split_words(title)][:max_len]
        return [CLS_ID] + ids

    def encode_batch(self, titles: Sequence[str], max_len: int = MAX_TITLE_TOKENS) -> np.ndarray:
        rows = [self.tokenize(t, max_len) for t in titles]
        width = max(len(r) for r in rows) if rows else 1
        out = np.full((len(rows), width), PAD_ID, dtype=np.int64)
        for i, r in enumerate(rows):
            out[i, : len(r)] = r
        return out


def tokenize(title: str, vocab: Vocabulary, max_len: int = MAX_TITLE_TOKENS) -> list[int]:
    return vocab.tokenize(title, max_len)
