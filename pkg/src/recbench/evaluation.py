"""Full-catalogue ranking, HR@N / NDCG@N, and grouped reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .autograd import no_grad
from .catalog import DatasetSplit


def full_rank(scores: np.ndarray, target: int) -> int:
    """1-based rank of ``target`` among all items; ties go to the lower item index."""
    scores = np.asarray(scores)
    if not 0 <= target < len(scores):
        raise IndexError(f"target {target} not in catalogue of {len(scores)} items")
    s = scores[target]
    idx = np.arange(len(scores))
    return int(1 + np.sum(scores > s) + np.sum((scores == s) & (idx < target)))


def batch_ranks(scores: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Vectorised :func:`full_rank` for a ``users × items`` score matrix."""
    scores = np.asarray(scores)
    targets = np.asarray(targets, dtype=np.int64)
    m = scores.shape[1]
    if targets.size and (targets.min() < 0 or targets.max() >= m):
        raise IndexError(f"target outside catalogue of {m} items")
    s = scores[np.arange(len(targets)), targets][:, None]
    lower = np.arange(m)[None, :] < targets[:, None]
    return 1 + (scores > s).sum(axis=1) + ((scores == s) & lower).sum(axis=1)


def hr_at_n(rank, n: int = 10):
    r = np.asarray(rank)
    if np.any(r < 1):
        raise ValueError("rank must be >= 1")
    out = (r <= n).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def ndcg_at_n(rank, n: int = 10):
    r = np.asarray(rank, dtype=np.float64)
    if np.any(r < 1):
        raise ValueError("rank must be >= 1")
    out = np.where(r <= n, 1.0 / np.log2(r + 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class GroupMetrics:
    users: int
    hr: float
    ndcg: float


@dataclass
class RankingReport:
    n: int
    groups: dict[str, GroupMetrics]
    metadata: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_tsv(self) -> str:
        lines = [f"group\tusers\thr@{self.n}\tndcg@{self.n}"]
        for name, g in self.groups.items():
            lines.append(f"{name}\t{g.users}\t{g.hr:.6f}\t{g.ndcg:.6f}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "groups": {k: {"users": g.users, "hr": g.hr, "ndcg": g.ndcg} for k, g in self.groups.items()},
            "metadata": self.metadata,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "RankingReport":
        return cls(
            n=int(d["n"]),
            groups={k: GroupMetrics(int(v["users"]), float(v["hr"]), float(v["ndcg"]))
                    for k, v in d["groups"].items()},
            metadata=dict(d.get("metadata", {})),
            notes=list(d.get("notes", [])),
        )

    def write(self, stem) -> None:
        """Write ``<stem>.tsv`` and ``<stem>.json``."""
        with open(f"{stem}.tsv", "w", encoding="utf-8") as fh:
            fh.write(self.to_tsv())
        with open(f"{stem}.json", "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def read(cls, path) -> "RankingReport":
        path = str(path)
        if path.endswith(".tsv"):
            path = path[:-4] + ".json"
        elif not path.endswith(".json"):
            path = path + ".json"
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def report_from_ranks(ranks: np.ndarray, groups: Mapping[str, np.ndarray], n: int = 10,
                      metadata: dict | None = None) -> RankingReport:
    """Average per-user metrics over each named user group; "regular" covers every user."""
    ranks = np.asarray(ranks)
    hits = hr_at_n(ranks, n) if ranks.size else np.zeros(0)
    gains = ndcg_at_n(ranks, n) if ranks.size else np.zeros(0)
    out: dict[str, GroupMetrics] = {}
    notes = []
    all_groups = {"regular": np.arange(len(ranks)), **groups}
    for name, users in all_groups.items():
        users = np.asarray(users, dtype=np.int64)
        if len(users) == 0:
            notes.append(f"group {name!r} is empty and was omitted")
            continue
        out[name] = GroupMetrics(int(len(users)), float(np.mean(hits[users])),
                                 float(np.mean(gains[users])))
    return RankingReport(n=n, groups=out, metadata=dict(metadata or {}), notes=notes)


ScoreFn = Callable[[np.ndarray, list], np.ndarray]


def compute_ranks(score_fn: ScoreFn, split: DatasetSplit, stage: str = "test",
                  exclude_history: bool = False, batch_size: int = 512) -> np.ndarray:
    """Rank each user's ``stage`` target against all items.

    ``score_fn(users, histories)`` returns a ``len(users) × n_items`` matrix.
    With ``exclude_history`` the user's previously seen items (other than the
    target) are pushed below everything else.
    """
    targets = split.targets(stage)
    ranks = np.empty(split.n_users, dtype=np.int64)
    for start in range(0, split.n_users, batch_size):
        users = np.arange(start, min(start + batch_size, split.n_users))
        hists = [split.history(int(u), stage) for u in users]
        scores = np.array(score_fn(users, hists), dtype=np.float64, copy=True)
        if exclude_history:
            for row, h in enumerate(hists):
                h = h[h != targets[users[row]]]
                scores[row, h] = -np.inf
        ranks[users] = batch_ranks(scores, targets[users])
    return ranks


def evaluate(model_or_fn, split: DatasetSplit, groups: Mapping[str, np.ndarray] | None = None,
             n: int = 10, stage: str = "test", exclude_history: bool = False,
             metadata: dict | None = None) -> RankingReport:
    """Full-ranking evaluation of a model (anything with ``score_users``) or a score function."""
    if hasattr(model_or_fn, "score_users"):
        model = model_or_fn
        model.eval()
        with no_grad():
            item_matrix = model.item_encoder.all_items().data
        score_fn = lambda users, hists: model.score_users(users, hists, item_matrix)  # noqa: E731
    else:
        score_fn = model_or_fn
    ranks = compute_ranks(score_fn, split, stage, exclude_history)
    return report_from_ranks(ranks, groups or {}, n, metadata)


def brute_force_metrics(score_matrix: np.ndarray, targets: np.ndarray, n: int = 10):
    """Reference path: sort each full score row and read the target's position."""
    hrs, ndcgs = [], []
    m = score_matrix.shape[1]
    for row, t in zip(score_matrix, targets):
        order = sorted(range(m), key=lambda j: (-row[j], j))
        rank = order.index(int(t)) + 1
        hrs.append(1 if rank <= n else 0)
        ndcgs.append(1.0 / np.log2(rank + 1) if rank <= n else 0.0)
    return np.array(hrs), np.array(ndcgs)
