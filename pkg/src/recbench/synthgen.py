"""Synthetic catalogues whose interactions are driven by latent item content.

Each item has a topic vector ``z``; its title is sampled from topic-specific
vocabulary blocks weighted by ``softmax(z / title_temperature)``; inside a
block, each word carries its own latent direction and is picked with weight
``exp(e_w·z / word_temperature)``, so word identity says more about ``z`` than
the topic alone. The dense feature vector is ``z`` plus Gaussian noise. Users pick items with probability
proportional to ``popularity * exp(w·z / tau)``, without replacement.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .catalog import DatasetSplit, InteractionLog, ItemTable, Vocabulary, write_interactions, write_items
from .errors import ConfigurationError
from .evaluation import RankingReport, evaluate


GROUND_TRUTH_PREFIX = "ground_truth_"


@dataclass
class GenConfig:
    n_users: int = 2000
    n_items: int = 500
    topics: int = 8
    title_len: int = 8
    vocab_size: int = 800
    min_interactions: int = 20
    max_interactions: int = 40
    cold_fraction: float = 0.1
    new_fraction: float = 0.02
    cold_target_rate: float = 0.2
    cold_limit: int = 9
    skew: float = 1.0
    tau: float = 1.0
    title_temperature: float = 0.25
    word_temperature: float = 1.0
    title_noise: float = 0.05
    feature_noise: float = 1.0
    drift: float = 0.2
    seed: int = 0

    def validate(self) -> None:
        if self.n_users < 1 or self.n_items < 2 or self.topics < 1:
            raise ConfigurationError("need at least one user, two items and one topic")
        if self.vocab_size // self.topics < 1:
            raise ConfigurationError(f"{self.topics} topics do not fit into a vocabulary of {self.vocab_size}")
        if not 0.0 <= self.cold_fraction < 1.0 or not 0.0 <= self.new_fraction < 1.0:
            raise ConfigurationError("cold and new fractions must lie in [0, 1)")
        if not 0.0 <= self.cold_target_rate <= 1.0:
            raise ConfigurationError("cold_target_rate must lie in [0, 1]")
        if self.min_interactions < 3 or self.max_interactions < self.min_interactions:
            raise ConfigurationError("interaction range must satisfy 3 <= min <= max")
        n_new = int(round(self.new_fraction * self.n_items))
        n_cold = int(round(self.cold_fraction * self.n_items))
        if self.max_interactions > self.n_items - n_new - n_cold + (1 if n_new + n_cold else 0):
            raise ConfigurationError(
                f"{self.max_interactions} interactions per user exceed the {self.n_items} items available")
        if self.tau <= 0 or self.title_temperature <= 0 or self.word_temperature <= 0:
            raise ConfigurationError("temperatures must be positive")


@dataclass
class GroundTruth:
    item_latent: np.ndarray     # m × T
    user_latent: np.ndarray     # n × T, at the start of each sequence
    user_final: np.ndarray      # n × T, after drift
    log_popularity: np.ndarray  # m
    tau: float
    cold_items: np.ndarray
    new_items: np.ndarray

    def logits(self, users=None) -> np.ndarray:
        """Sampling log-weights (up to a per-user constant) at the end of each sequence."""
        w = self.user_final if users is None else self.user_final[np.asarray(users)]
        return w @ self.item_latent.T / self.tau + self.log_popularity

    def probabilities(self, users=None) -> np.ndarray:
        lg = self.logits(users)
        lg = lg - lg.max(axis=1, keepdims=True)
        p = np.exp(lg)
        return p / p.sum(axis=1, keepdims=True)

    def subset_items(self, old_indices) -> "GroundTruth":
        idx = np.asarray(old_indices, dtype=np.int64)
        remap = {int(o): k for k, o in enumerate(idx)}
        return GroundTruth(self.item_latent[idx], self.user_latent, self.user_final,
                           self.log_popularity[idx], self.tau,
                           np.array([remap[i] for i in self.cold_items if int(i) in remap], dtype=np.int64),
                           np.array([remap[i] for i in self.new_items if int(i) in remap], dtype=np.int64))


def topic_blocks(config: GenConfig) -> np.ndarray:
    """Topic owning each content word (words beyond an even split are left unowned, -1)."""
    size = config.vocab_size // config.topics
    owner = np.full(config.vocab_size, -1, dtype=np.int64)
    owner[: size * config.topics] = np.repeat(np.arange(config.topics), size)
    return owner


def word(k: int) -> str:
    return f"w{k}"


def word_vectors(config: GenConfig) -> np.ndarray:
    """Latent direction of every content word (``vocab_size × topics``)."""
    return np.random.default_rng([config.seed, 4]).standard_normal((config.vocab_size, config.topics))


def generate_title_words(z: np.ndarray, config: GenConfig, rng: np.random.Generator,
                         vectors: np.ndarray | None = None) -> np.ndarray:
    """Content-word indices for one title drawn from the topic mixture of ``z``."""
    size = config.vocab_size // config.topics
    vectors = word_vectors(config) if vectors is None else vectors
    logits = z / config.title_temperature
    probs = np.exp(logits - logits.max())
    probs /= probs.sum()
    topics = rng.choice(config.topics, size=config.title_len, p=probs)
    words = np.empty(config.title_len, dtype=np.int64)
    for j, k in enumerate(topics):
        affinity = vectors[k * size:(k + 1) * size] @ z / config.word_temperature
        within = np.exp(affinity - affinity.max())
        words[j] = k * size + rng.choice(size, p=within / within.sum())
    noisy = rng.random(config.title_len) < config.title_noise
    words[noisy] = rng.integers(0, config.vocab_size, size=int(noisy.sum()))
    return words


def generate(config: GenConfig) -> tuple[ItemTable, InteractionLog, GroundTruth]:
    """Draw items, titles, features and interaction sequences from ``config``.

    Cold items appear at most ``cold_limit`` times outside the final position
    of any sequence; new items appear only in final positions. A
    ``cold_target_rate`` share of final positions is drawn from cold and new
    items.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    n, m, T = config.n_users, config.n_items, config.topics

    z = rng.standard_normal((m, T))
    w = rng.standard_normal((n, T))
    ranks = rng.permutation(m) + 1
    log_pop = -config.skew * np.log(ranks.astype(np.float64))

    roles = rng.permutation(m)
    n_new = int(round(config.new_fraction * m))
    n_cold = int(round(config.cold_fraction * m))
    new_items = np.sort(roles[:n_new])
    cold_items = np.sort(roles[n_new:n_new + n_cold])
    is_new = np.zeros(m, dtype=bool)
    is_new[new_items] = True
    is_cold = np.zeros(m, dtype=bool)
    is_cold[cold_items] = True
    quota = np.where(is_cold, config.cold_limit, 0)

    vocab = Vocabulary([word(k) for k in range(config.vocab_size)])
    title_rng = np.random.default_rng([config.seed, 1])
    vectors = word_vectors(config)
    titles = [" ".join(word(k) for k in generate_title_words(z[i], config, title_rng, vectors))
              for i in range(m)]
    tokens = vocab.encode_batch(titles)
    features = z + config.feature_noise * np.random.default_rng([config.seed, 2]).standard_normal((m, T))

    seq_rng = np.random.default_rng([config.seed, 3])
    sequences, stamps = [], []
    w_final = w.copy()
    for u in range(n):
        length = int(seq_rng.integers(config.min_interactions, config.max_interactions + 1))
        steps = np.cumsum(config.drift * seq_rng.standard_normal((length, T)), axis=0) if config.drift else 0.0
        wt = w[u] + steps if config.drift else np.broadcast_to(w[u], (length, T))
        w_final[u] = wt[-1]
        keys = wt @ z.T / config.tau + log_pop + seq_rng.gumbel(size=(length, m))
        allowed = ~is_new & (~is_cold | (quota > 0))
        chosen = np.empty(length, dtype=np.int64)
        for t in range(length - 1):
            i = int(np.argmax(np.where(allowed, keys[t], -np.inf)))
            chosen[t] = i
            allowed[i] = False
        final_pool = np.ones(m, dtype=bool)
        final_pool[chosen[: length - 1]] = False
        if (n_new + n_cold) and seq_rng.random() < config.cold_target_rate:
            final_pool &= is_new | is_cold
        else:
            final_pool &= ~is_new & ~is_cold
        if not final_pool.any():
            final_pool = ~is_new.copy()
            final_pool[chosen[: length - 1]] = False
        chosen[-1] = int(np.argmax(np.where(final_pool, keys[-1], -np.inf)))
        quota[chosen[: length - 1]] -= is_cold[chosen[: length - 1]]
        sequences.append(chosen)
        stamps.append(np.arange(length, dtype=np.int64) * 60 + u * 100_000)

    log = InteractionLog(sequences, stamps, m)
    items = ItemTable(n_items=m, tokens=tokens, features=features, titles=titles, vocab=vocab)
    truth = GroundTruth(z, w, w_final, log_pop, config.tau, cold_items, new_items)
    return items, log, truth


def oracle_scores(truth: GroundTruth):
    """Score function ranking by the true sampling weight; seen items rank last."""
    def score_fn(users, histories):
        scores = truth.logits(users)
        for row, h in enumerate(histories):
            scores[row, h] = -np.inf
        return scores
    return score_fn


def oracle_metrics(truth: GroundTruth, split: DatasetSplit, n: int = 10, groups=None,
                   stage: str = "test") -> RankingReport:
    """Ceiling metrics from ranking by the generator's own affinities."""
    return evaluate(oracle_scores(truth), split, groups, n=n, stage=stage,
                    metadata={"model": "oracle"})


def write_dataset(out_dir, items: ItemTable, log: InteractionLog, truth: GroundTruth,
                  config: GenConfig | None = None) -> dict[str, Path]:
    """Emit interaction, item and ground-truth files into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "interactions": out / "interactions.tsv",
        "items": out / "items.tsv",
        "truth_items": out / f"{GROUND_TRUTH_PREFIX}items.tsv",
        "truth_users": out / f"{GROUND_TRUTH_PREFIX}users.tsv",
    }
    write_interactions(log, paths["interactions"])
    write_items(items, log.item_keys, paths["items"])
    with open(paths["truth_items"], "w", encoding="utf-8") as fh:
        for i, zi in enumerate(truth.item_latent):
            fh.write(f"{i}\t{','.join(repr(float(v)) for v in zi)}\n")
    with open(paths["truth_users"], "w", encoding="utf-8") as fh:
        for u, wu in enumerate(truth.user_final):
            fh.write(f"{u}\t{','.join(repr(float(v)) for v in wu)}\n")
    if config is not None:
        with open(out / "gen_config.ini", "w", encoding="utf-8") as fh:
            fh.write("[gen]\n")
            for k, v in asdict(config).items():
                fh.write(f"{k} = {v}\n")
    return paths
