import numpy as np
import pytest

from recbench import autograd as ag
from recbench import catalog, synthgen
from recbench.errors import ConfigurationError
from recbench.optim import AdamW, ParamGroup
from recbench.synthgen import GenConfig


@pytest.fixture(scope="module")
def default_data():
    cfg = GenConfig(seed=7)
    return (cfg,) + synthgen.generate(cfg)


def test_same_seed_bit_identical():
    cfg = GenConfig(n_users=100, n_items=80, min_interactions=5, max_interactions=10, seed=11)
    a, b = synthgen.generate(cfg), synthgen.generate(cfg)
    np.testing.assert_array_equal(a[0].tokens, b[0].tokens)
    np.testing.assert_array_equal(a[0].features, b[0].features)
    for s, t in zip(a[1].sequences, b[1].sequences):
        np.testing.assert_array_equal(s, t)
    np.testing.assert_array_equal(a[2].item_latent, b[2].item_latent)
    c = synthgen.generate(GenConfig(n_users=100, n_items=80, min_interactions=5, max_interactions=10, seed=12))
    assert not np.array_equal(a[0].features, c[0].features)


def test_infeasible_config_rejected():
    with pytest.raises(ConfigurationError):
        synthgen.generate(GenConfig(n_items=30, min_interactions=20, max_interactions=40))
    with pytest.raises(ConfigurationError):
        GenConfig(cold_fraction=1.0).validate()
    with pytest.raises(ConfigurationError):
        GenConfig(topics=900, vocab_size=800).validate()


def test_huge_tau_recovers_popularity_distribution():
    # three draws per user keeps the without-replacement distortion small
    cfg = GenConfig(n_users=33_334, n_items=500, min_interactions=3, max_interactions=3, tau=1e9,
                    cold_fraction=0.0, new_fraction=0.0, seed=1)
    _, log, truth = synthgen.generate(cfg)
    draws = np.concatenate(log.sequences)[:100_000]
    p = np.exp(truth.log_popularity)
    p /= p.sum()
    order = np.argsort(-p)
    emp = np.bincount(draws, minlength=500)[order] / len(draws)
    ks = np.abs(np.cumsum(emp) - np.cumsum(p[order])).max()
    assert ks < 0.05


def test_topic_pure_titles():
    cfg = GenConfig()
    owner = synthgen.topic_blocks(cfg)
    rng = np.random.default_rng(0)
    for topic in range(cfg.topics):
        z = np.zeros(cfg.topics)
        z[topic] = 1.0
        words = np.concatenate([synthgen.generate_title_words(z, cfg, rng) for _ in range(500)])
        assert np.mean(owner[words] == topic) >= 0.80


def test_titles_tokenize_into_vocab(default_data):
    cfg, items, _, _ = default_data
    assert items.tokens.shape == (cfg.n_items, cfg.title_len + 1)
    assert (items.tokens[:, 0] == catalog.CLS_ID).all()
    assert (items.tokens[:, 1:] > catalog.MASK_ID).all()
    assert len(items.vocab) == cfg.vocab_size + 4


def test_token_bag_classifier_beats_chance(default_data):
    cfg, items, _, truth = default_data
    labels = truth.item_latent.argmax(axis=1)
    bags = np.zeros((cfg.n_items, len(items.vocab)))
    for i, row in enumerate(items.tokens):
        np.add.at(bags[i], row[1:], 1.0)
    train, test = np.arange(0, 400), np.arange(400, 500)
    w = ag.Parameter(np.zeros((bags.shape[1], cfg.topics)))
    opt = AdamW([ParamGroup([w], 0.05, 0.0)])
    for _ in range(100):
        logp = ag.log_softmax(ag.matmul(bags[train], w), axis=-1)
        loss = -ag.mean(logp[np.arange(len(train)), labels[train]])
        opt.zero_grad()
        ag.backward(loss)
        opt.step()
    acc = np.mean((bags[test] @ w.data).argmax(axis=1) == labels[test])
    assert acc > 2 / cfg.topics


def test_cold_and_new_quotas(default_data):
    cfg, _, log, truth = default_data
    assert len(truth.cold_items) == round(cfg.cold_fraction * cfg.n_items)
    assert len(truth.new_items) == round(cfg.new_fraction * cfg.n_items)
    assert not set(truth.cold_items) & set(truth.new_items)
    body = np.concatenate([s[:-1] for s in log.sequences])
    counts = np.bincount(body, minlength=cfg.n_items)
    assert counts[truth.new_items].max() == 0
    assert counts[truth.cold_items].max() <= cfg.cold_limit
    finals = np.array([s[-1] for s in log.sequences])
    share = np.isin(finals, np.concatenate([truth.cold_items, truth.new_items])).mean()
    assert abs(share - cfg.cold_target_rate) < 0.03


def test_split_groups_follow_quotas(default_data):
    cfg, _, log, truth = default_data
    split = catalog.leave_one_out_split(log)
    part = catalog.cold_new_partition(split.train, split.test, split.n_items)
    assert set(split.test[part.new]) <= set(truth.new_items) | set(truth.cold_items)
    assert len(part.new) > 0 and len(part.cold) > 0


def test_sequences_have_no_repeats(default_data):
    _, _, log, _ = default_data
    assert all(len(np.unique(s)) == len(s) for s in log.sequences)
    log.validate()


def test_greedy_generation_oracle_is_perfect():
    cfg = GenConfig(n_users=200, n_items=100, min_interactions=5, max_interactions=10, tau=1e-6,
                    cold_fraction=0.0, new_fraction=0.0, drift=0.0, seed=2)
    _, log, truth = synthgen.generate(cfg)
    split = catalog.leave_one_out_split(log)
    rep = synthgen.oracle_metrics(truth, split, n=10)
    assert rep.groups["regular"].hr == 1.0


def shuffled_oracle(tau):
    cfg = GenConfig(n_users=3000, n_items=500, skew=0.0, tau=tau, cold_fraction=0.0, new_fraction=0.0, seed=4)
    _, log, truth = synthgen.generate(cfg)
    split = catalog.leave_one_out_split(log)
    true_probs = truth.probabilities()
    truth.user_final = truth.user_final[np.random.default_rng(0).permutation(cfg.n_users)]
    rep = synthgen.oracle_metrics(truth, split, n=10)
    return split, truth, true_probs, rep


def test_shuffled_latent_oracle_near_random_when_preferences_are_weak():
    split, _, _, rep = shuffled_oracle(tau=1e3)
    # the target is then close to uniform over the items outside the history
    expect = np.mean([10 / (split.n_items - len(split.history(u, "test"))) for u in range(split.n_users)])
    sd = np.sqrt(expect * (1 - expect) / split.n_users)
    assert abs(rep.groups["regular"].hr - expect) < 3 * sd


def test_shuffled_latent_oracle_matches_exact_expectation():
    split, truth, true_probs, rep = shuffled_oracle(tau=1.0)
    # exact hit probability: mass the true final-draw distribution puts on the shuffled top 10
    scores = synthgen.oracle_scores(truth)(np.arange(split.n_users),
                                           [split.history(u, "test") for u in range(split.n_users)])
    hit_p = np.empty(split.n_users)
    for u in range(split.n_users):
        p = true_probs[u].copy()
        p[split.history(u, "test")] = 0.0
        top = np.argsort(-scores[u], kind="stable")[:10]
        hit_p[u] = p[top].sum() / p.sum()
    sd = np.sqrt(np.sum(hit_p * (1 - hit_p))) / split.n_users
    assert abs(rep.groups["regular"].hr - hit_p.mean()) < 3 * sd


def test_oracle_beats_random_on_default(default_data):
    _, _, log, truth = default_data
    split = catalog.leave_one_out_split(log)
    rep = synthgen.oracle_metrics(truth, split)
    assert rep.groups["regular"].hr > 5 * 10 / split.n_items


def test_write_dataset_roundtrip(tmp_path):
    cfg = GenConfig(n_users=50, n_items=60, min_interactions=5, max_interactions=8, seed=3)
    items, log, truth = synthgen.generate(cfg)
    paths = synthgen.write_dataset(tmp_path, items, log, truth, cfg)
    again = catalog.load_interactions(paths["interactions"])
    assert again.num_interactions == log.num_interactions
    table = catalog.load_items(paths["items"], again.item_keys, vocab=items.vocab)
    order = [int(k) for k in again.item_keys]
    np.testing.assert_array_equal(table.tokens, items.tokens[order])
    np.testing.assert_array_equal(table.features, items.features[order])
    z_lines = paths["truth_items"].read_text().splitlines()
    assert len(z_lines) == cfg.n_items and z_lines[0].split("\t")[0] == "0"
    assert (tmp_path / "gen_config.ini").exists()
