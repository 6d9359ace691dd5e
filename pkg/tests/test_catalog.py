import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from recbench import catalog
from recbench.catalog import CLS_ID, UNK_ID, InteractionLog, Vocabulary
from recbench.errors import ContractError, EmptyInputError, ParseError


def log_of(seqs, n_items=None):
    seqs = [np.asarray(s, dtype=np.int64) for s in seqs]
    n_items = n_items or (max(int(s.max()) for s in seqs if len(s)) + 1)
    return InteractionLog(seqs, [np.arange(len(s), dtype=np.int64) for s in seqs], n_items)


def write(tmp_path, text, name="log.tsv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# loading ------------------------------------------------------------------

def test_load_three_rows_two_users(tmp_path):
    log = catalog.load_interactions(write(tmp_path, "u1\ta\t1\nu1\tb\t2\nu2\ta\t5\n"))
    assert log.n_users == 2 and log.num_interactions == 3 and log.n_items == 2


def test_duplicate_row_kept_once(tmp_path):
    log = catalog.load_interactions(write(tmp_path, "u\ta\t1\nu\ta\t1\nu\tb\t2\nu\tc\t3\n"))
    assert log.num_interactions == 3


def test_out_of_order_timestamps_sorted(tmp_path):
    log = catalog.load_interactions(write(tmp_path, "u\tc\t30\nu\ta\t10\nu\tb\t20\n"))
    assert [log.item_keys[i] for i in log.sequences[0]] == ["a", "b", "c"]
    log.validate()


def test_timestamp_ties_keep_file_order(tmp_path):
    log = catalog.load_interactions(write(tmp_path, "u\tz\t5\nu\ty\t5\nu\tx\t1\n"))
    assert [log.item_keys[i] for i in log.sequences[0]] == ["x", "z", "y"]


def test_comments_and_schema(tmp_path):
    log = catalog.load_interactions(write(tmp_path, "# ts user item\n7\tu\ta\n"), schema=(1, 2, 0))
    assert log.user_keys == ["u"] and log.timestamps[0].tolist() == [7]


def test_malformed_row_reports_line(tmp_path):
    with pytest.raises(ParseError, match="line 2"):
        catalog.load_interactions(write(tmp_path, "u\ta\t1\nu\tb\tnoon\n"))
    with pytest.raises(ParseError, match="line 1"):
        catalog.load_interactions(write(tmp_path, "u\ta\n"))


def test_empty_file(tmp_path):
    with pytest.raises(EmptyInputError):
        catalog.load_interactions(write(tmp_path, "# only a comment\n"))


def test_interaction_file_roundtrip(tmp_path):
    log = catalog.load_interactions(write(tmp_path, "u1\ta\t1\nu2\tb\t2\nu1\tc\t3\n"))
    out = tmp_path / "again.tsv"
    catalog.write_interactions(log, out)
    again = catalog.load_interactions(out)
    assert again.user_keys == log.user_keys
    for u in range(log.n_users):
        assert [again.item_keys[i] for i in again.sequences[u]] == [log.item_keys[i] for i in log.sequences[u]]
        np.testing.assert_array_equal(again.timestamps[u], log.timestamps[u])


def test_items_file_roundtrip(tmp_path):
    p = write(tmp_path, "a\tRed Dress\t0.5,1.5\nb\t\t1,2\n", "items.tsv")
    items = catalog.load_items(p, ["a", "b", "c"])
    assert items.titles == ["Red Dress", "", ""]
    np.testing.assert_array_equal(items.features, [[0.5, 1.5], [1, 2], [0, 0]])
    assert items.tokens[0].tolist() == [CLS_ID, items.vocab.id("red"), items.vocab.id("dress")]
    out = tmp_path / "items2.tsv"
    catalog.write_items(items, ["a", "b", "c"], out)
    again = catalog.load_items(out, ["a", "b", "c"], vocab=items.vocab)
    np.testing.assert_array_equal(again.features, items.features)
    np.testing.assert_array_equal(again.tokens, items.tokens)


def test_items_bad_features(tmp_path):
    with pytest.raises(ParseError, match="line 1"):
        catalog.load_items(write(tmp_path, "a\tt\t1,x\n", "i.tsv"), ["a"])


# filtering ----------------------------------------------------------------

def test_min_interactions_boundary():
    log = log_of([[0, 1, 2, 3], [0, 1, 2, 3, 4]])
    kept = catalog.filter_min_interactions(log, 5)
    assert kept.n_users == 1 and kept.user_keys == [1] and len(kept.sequences[0]) == 5


def test_min_interactions_k1_is_identity():
    log = log_of([[0], [1, 2], [2, 0, 1]])
    kept = catalog.filter_min_interactions(log, 1)
    assert kept.n_items == log.n_items
    for a, b in zip(log.sequences, kept.sequences):
        np.testing.assert_array_equal(a, b)


def test_filter_redensifies_items():
    log = log_of([[5, 7, 9, 5, 7], [1, 2]], n_items=10)
    kept = catalog.filter_min_interactions(log, 5)
    assert kept.n_items == 3 and kept.item_keys == [5, 7, 9]
    assert kept.sequences[0].tolist() == [0, 1, 2, 0, 1]


def test_truncate():
    log = log_of([list(range(30)), list(range(10))])
    out = catalog.truncate_user_sequences(log, 23)
    assert out.sequences[0].tolist() == list(range(7, 30))
    assert out.sequences[1].tolist() == list(range(10))
    assert all(len(s) <= 13 for s in catalog.truncate_user_sequences(log, 13).sequences)
    with pytest.raises(ValueError):
        catalog.truncate_user_sequences(log, 2)


def test_warm_filter_toy_counts():
    # item 0 ×3, 1 ×7, 2 ×20, 3 ×21 spread over users
    rng = np.random.default_rng(0)
    items = np.repeat(np.arange(4), [3, 7, 20, 21])
    rng.shuffle(items)
    seqs = np.array_split(items, 6)
    out = catalog.warm_k_filter(log_of(seqs, 4), 20)
    assert sorted(out.item_keys) == [2, 3]


def test_warm_filter_k0_identity_and_19_removed():
    log = log_of([[0] * 1 + [1] * 2])
    assert catalog.warm_k_filter(log, 0) is log
    seqs = [[0, 1, 2, 3]] * 19 + [[1, 2, 3, 4]]
    out = catalog.warm_k_filter(log_of(seqs), 20)
    assert 0 not in out.item_keys and 1 in out.item_keys


def warm_brute(log, k, min_user=3):
    counts = {}
    for s in log.sequences:
        for i in s.tolist():
            counts[i] = counts.get(i, 0) + 1
    out = []
    for s in log.sequences:
        kept = [log.item_keys[i] for i in s.tolist() if counts[i] >= k]
        if len(kept) >= min_user:
            out.append(kept)
    return out


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2, 5, 20]))
def test_warm_filter_matches_brute_force(seed, k):
    rng = np.random.default_rng(seed)
    seqs = [rng.choice(30, size=rng.integers(1, 15), replace=False) for _ in range(40)]
    log = log_of(seqs, 30)
    out = catalog.warm_k_filter(log, k)
    assert [[out.item_keys[i] for i in s.tolist()] for s in out.sequences] == warm_brute(log, k)
    assert all(len(s) for s in out.sequences)
    assert sorted(set(np.concatenate(out.sequences).tolist())) == list(range(out.n_items)) if out.sequences else True


# split --------------------------------------------------------------------

def test_leave_one_out_examples():
    split = catalog.leave_one_out_split(log_of([[0, 1, 2, 3, 4], [5, 6, 7]]))
    assert split.train[0].tolist() == [0, 1, 2] and split.valid[0] == 3 and split.test[0] == 4
    assert split.train[1].tolist() == [5] and split.valid[1] == 6 and split.test[1] == 7
    assert len(split.valid) == len(split.test) == 2
    assert split.history(0, "valid").tolist() == [0, 1, 2]
    assert split.history(0, "test").tolist() == [0, 1, 2, 3]


def test_leave_one_out_needs_three():
    with pytest.raises(ContractError):
        catalog.leave_one_out_split(log_of([[0, 1]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_split_roundtrip(seed):
    rng = np.random.default_rng(seed)
    seqs = [rng.integers(0, 50, size=rng.integers(3, 25)) for _ in range(20)]
    split = catalog.leave_one_out_split(log_of(seqs, 50))
    for u, s in enumerate(seqs):
        np.testing.assert_array_equal(np.concatenate([split.train[u], [split.valid[u], split.test[u]]]), s)


def test_cold_new_partition_boundaries():
    train = [np.array([0] * 9 + [1] * 10)]
    part = catalog.cold_new_partition(train, np.array([2, 0, 1]), 3)
    assert part.new.tolist() == [0] and part.cold.tolist() == [1] and part.other.tolist() == [2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_cold_new_partitions_test_set(seed):
    rng = np.random.default_rng(seed)
    train = [rng.integers(0, 40, size=rng.integers(1, 20)) for _ in range(50)]
    targets = rng.integers(0, 40, size=50)
    part = catalog.cold_new_partition(train, targets, 40)
    joined = np.concatenate([part.cold, part.new, part.other])
    assert sorted(joined.tolist()) == list(range(50))


# histogram ------------------------------------------------------------------

def test_histogram_flat_and_single(tmp_path):
    hist = catalog.popularity_histogram([np.array([0, 1, 2] * 5)], 3)
    assert hist[:, 1].tolist() == [5, 5, 5] and hist[:, 0].tolist() == [0, 1, 2]
    single = catalog.popularity_histogram([np.array([0, 0]), np.array([0])], 1)
    assert single.tolist() == [[0, 3]]
    catalog.write_histogram(hist, tmp_path / "h.tsv")
    assert (tmp_path / "h.tsv").read_text().splitlines()[0] == "0\t5"


def test_histogram_sorted_descending():
    rng = np.random.default_rng(0)
    hist = catalog.popularity_histogram([rng.zipf(1.5, 500) % 50], 50)
    assert np.all(np.diff(hist[:, 1]) <= 0)


# tokenizer ----------------------------------------------------------------

def test_tokenize_basic():
    vocab = Vocabulary.build(["red dress", "blue shoes"])
    assert catalog.tokenize("Red Dress", vocab) == [CLS_ID, vocab.id("red"), vocab.id("dress")]
    assert catalog.tokenize("red, hat!", vocab) == [CLS_ID, vocab.id("red"), UNK_ID]
    assert catalog.tokenize("", vocab) == [CLS_ID]


def test_tokenize_truncates_to_max_len():
    vocab = Vocabulary.build(["w"])
    toks = catalog.tokenize(" ".join(["w"] * 40), vocab, max_len=30)
    assert len(toks) == 31 and toks[0] == CLS_ID


def test_reserved_ids():
    vocab = Vocabulary(["[CLS]", "alpha"])
    assert vocab.itos[:4] == ["[PAD]", "[UNK]", "[CLS]", "[MASK]"]
    assert vocab.id("alpha") == 4


def test_encode_batch_pads_with_zero():
    vocab = Vocabulary.build(["a b c", "a"])
    batch = vocab.encode_batch(["a b c", "a", ""])
    assert batch.shape == (3, 4)
    assert batch[2].tolist() == [CLS_ID, 0, 0, 0]
