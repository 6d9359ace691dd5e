import numpy as np
import pytest

from recbench import experiment as ex
from recbench import synthgen
from recbench.errors import ConfigurationError
from recbench.evaluation import GroupMetrics, RankingReport
from recbench.experiment import ExperimentConfig

TINY = """
[synth]
n_users = 60
n_items = 40
vocab_size = 80
topics = 4
min_interactions = 6
max_interactions = 12
seed = 3

[model]
sasrec_blocks = 1

[item_encoder]
text_width = 16
text_blocks = 1

[train]
epochs = 2
batch_size = 32
dim = 16

[eval]
warm_k = 10,20
"""


def tiny(out, **overrides) -> ExperimentConfig:
    cfg = ExperimentConfig.from_text(TINY, str(out))
    return cfg.with_overrides(overrides) if overrides else cfg


# config ---------------------------------------------------------------------------

def test_snapshot_roundtrip_and_defaults_printed(tmp_path):
    cfg = tiny(tmp_path)
    text = cfg.snapshot()
    assert ExperimentConfig.from_text(text).snapshot() == text
    assert "patience = 5" in text and "lr_modality = 0.001" in text and "[synth]" in text


def test_unknown_or_malformed_entries_rejected():
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_text("[nope]\na = 1\n")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_text("[train]\nlearning_rate = 1\n")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_text("[train]\nepochs = many\n")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_text("not an ini")


def test_id_and_text_snapshots_differ_only_in_encoder_block(tmp_path):
    a = tiny(tmp_path).snapshot().split("\n")
    b = tiny(tmp_path, **{"item_encoder.kind": "text_e2e"}).snapshot().split("\n")
    section, changed = None, set()
    for x, y in zip(a, b):
        if x.startswith("["):
            section = x
        if x != y:
            changed.add(section)
    assert changed == {"[item_encoder]"}


def test_lr_override_carries_modality_rate():
    cfg = ExperimentConfig().with_overrides({"train.lr": "0.01"})
    assert cfg.train.lr_modality == 0.01
    cfg = ExperimentConfig().with_overrides({"train.lr": "0.01", "train.lr_modality": "0.5"})
    assert cfg.train.lr_modality == 0.5
    assert ExperimentConfig.from_text("[train]\nlr = 0.2\n").train.lr_modality == 0.2


@pytest.mark.parametrize("overrides", [
    {"model.backbone": "gru"},
    {"item_encoder.kind": "image"},
    {"item_encoder.kind": "frozen", "item_encoder.adapter_depth": "3"},
    {"item_encoder.kind": "fusion", "item_encoder.fusion_mode": "mul"},
    {"data.source": "files"},
    {"eval.warm_k": "a,b"},
    {"data.schema": "0,0,1"},
])
def test_validation_failures(overrides):
    with pytest.raises(ConfigurationError):
        ExperimentConfig().with_overrides(overrides).validate()


def test_ground_truth_paths_refused(tmp_path):
    items, log, truth = synthgen.generate(synthgen.GenConfig(n_users=20, n_items=30, min_interactions=5,
                                                             max_interactions=6))
    paths = synthgen.write_dataset(tmp_path, items, log, truth)
    cfg = ExperimentConfig().with_overrides({"data.source": "files", "data.interactions": str(paths["interactions"]),
                                             "data.items": str(paths["truth_items"])})
    with pytest.raises(ConfigurationError):
        cfg.validate()


def test_grid_expands_to_eight_cells(tmp_path):
    grid = TINY + "\n[grid]\nmodel.backbone = sasrec, dssm\nitem_encoder.kind = id, text_e2e, frozen, fusion\n"
    cells = ex.expand_grid(grid, str(tmp_path))
    assert len(cells) == 8
    assert len({c.output_dir for c in cells}) == 8
    assert {(c.model.backbone, c.item_encoder.kind) for c in cells} == {
        (b, k) for b in ("sasrec", "dssm") for k in ("id", "text_e2e", "frozen", "fusion")}
    assert all(c.synth.n_users == 60 for c in cells)


# parameter counts -----------------------------------------------------------------

@pytest.mark.parametrize("backbone", ["sasrec", "dssm"])
@pytest.mark.parametrize("encoder", [
    {"item_encoder.kind": "id"},
    {"item_encoder.kind": "text_e2e"},
    {"item_encoder.kind": "frozen", "item_encoder.adapter_depth": "0"},
    {"item_encoder.kind": "frozen", "item_encoder.adapter_depth": "4"},
    {"item_encoder.kind": "linear"},
    {"item_encoder.kind": "fusion", "item_encoder.fusion_mode": "con", "item_encoder.fusion_depth": "2"},
    {"item_encoder.kind": "fusion", "item_encoder.fusion_modality": "features"},
])
def test_parameter_count_matches_closed_form(tmp_path, backbone, encoder):
    cfg = tiny(tmp_path, **{"model.backbone": backbone, "model.dssm_tower_layers": "2", **encoder})
    data = ex.prepare(cfg)
    model = ex.build_model(cfg, data)
    expect = ex.count_parameters(cfg, data.split.n_users, data.split.n_items, len(data.items.vocab),
                                 data.items.features.shape[1])
    assert model.num_parameters() == expect


# running ----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    out = {}
    for name, kind in (("id", "id"), ("id_again", "id"), ("text", "text_e2e")):
        out[name] = ex.run_experiment(tiny(root / name, **{"item_encoder.kind": kind}))
    return out


def test_artifacts_written(runs):
    d = runs["id"].directory
    for name in ("config.ini", "train_report.tsv", "ranking_report.tsv", "ranking_report.json", "checkpoint.bin"):
        assert (d / name).exists()
    rep = runs["id"].ranking_report
    assert list(rep.groups)[:4] == ["regular", "cold", "new", "other"] or "new" not in rep.groups
    assert rep.metadata["family"] == "IDRec" and runs["text"].ranking_report.metadata["family"] == "MoRec"


def test_same_config_gives_identical_reports(runs):
    a, b = runs["id"].directory, runs["id_again"].directory
    assert (a / "ranking_report.tsv").read_bytes() == (b / "ranking_report.tsv").read_bytes()
    assert (a / "ranking_report.json").read_bytes() == (b / "ranking_report.json").read_bytes()
    assert runs["id"].train_report.to_tsv(include_time=False) == runs["id_again"].train_report.to_tsv(include_time=False)


def test_snapshot_reproduces_run(runs, tmp_path):
    d = runs["text"].directory
    cfg = ExperimentConfig.from_file(d / "config.ini", str(tmp_path / "again"))
    again = ex.run_experiment(cfg)
    assert again.ranking_report.to_json() == runs["text"].ranking_report.to_json()


def test_reevaluate_from_checkpoint(runs, tmp_path):
    d = runs["text"].directory
    rep = ex.reevaluate(d, tmp_path / "re")
    assert rep.to_json() == (d / "ranking_report.json").read_text()


def test_warm_groups_match_counts(runs):
    cfg = tiny(runs["id"].directory)
    data = ex.prepare(cfg)
    counts = data.log.item_counts()
    for k in (10, 20):
        brute = [u for u in range(data.split.n_users) if counts[data.split.test[u]] >= k]
        assert data.groups[f"warm-{k}"].tolist() == brute


def test_text_epochs_cost_more_time(runs):
    table = ex.cost_report({"id": runs["id"].train_report, "text": runs["text"].train_report})
    rows = {line.split("\t")[0]: line.split("\t") for line in table.splitlines()[1:]}
    assert float(rows["text"][2]) > float(rows["id"][2])
    assert int(rows["id"][1]) == runs["id"].train_report.num_parameters


def test_cost_of_nothing_is_header_only():
    assert ex.cost_report({}) == "config\tparams\tseconds_per_epoch\n"


# comparison ---------------------------------------------------------------------------

def report(hr, family, dataset="d0", n=10):
    return RankingReport(n, {"regular": GroupMetrics(100, hr, hr / 2)},
                         metadata={"family": family, "dataset_hash": dataset})


def test_relative_improvement_published_values():
    assert ex.format_percent(ex.relative_improvement(18.68, 17.71)) == "+5.48%"
    assert ex.format_percent(ex.relative_improvement(3.98, 4.01)) == "-0.75%"


def test_identical_reports_zero_everywhere(runs):
    rows = ex.compare([runs["id"].ranking_report, runs["id_again"].ranking_report])
    assert rows and all(ex.format_percent(r.improvement) == "0.00%" for r in rows)


def test_compare_takes_best_of_each_family():
    rows = ex.compare([report(0.10, "IDRec"), report(0.12, "IDRec"), report(0.15, "MoRec"), report(0.09, "MoRec")])
    hr = rows[0]
    assert (hr.idrec, hr.morec) == (0.12, 0.15)
    assert ex.format_percent(hr.improvement) == "+25.00%"


def test_compare_refuses_mixed_datasets():
    with pytest.raises(ex.ComparisonError, match="different datasets"):
        ex.compare([report(0.1, "IDRec", "a"), report(0.2, "MoRec", "b")])
    with pytest.raises(ex.ComparisonError):
        ex.compare([report(0.1, "IDRec", n=10), report(0.2, "MoRec", n=20)])


def test_dataset_hash_tracks_data(tmp_path):
    h1 = ex.prepare(tiny(tmp_path)).dataset_hash()
    h2 = ex.prepare(tiny(tmp_path, **{"item_encoder.kind": "text_e2e"})).dataset_hash()
    h3 = ex.prepare(tiny(tmp_path, **{"synth.seed": "4"})).dataset_hash()
    assert h1 == h2 != h3


def test_collapse_without_finite_epoch_skips_ranking(tmp_path, monkeypatch):
    cfg = tiny(tmp_path)
    data = ex.prepare(cfg)
    real = ex.build_model

    def poisoned(c, d):
        model = real(c, d)
        model.item_encoder.table.weight.data[:] = np.nan
        return model

    monkeypatch.setattr(ex, "build_model", poisoned)
    res = ex.run_experiment(cfg, data)
    assert res.collapsed and res.ranking_report is None
    assert (tmp_path / "train_report.tsv").exists() and not (tmp_path / "checkpoint.bin").exists()


def test_precision_switch_is_scoped(tmp_path):
    from recbench import autograd as ag
    cfg = tiny(tmp_path, **{"model.precision": "float32"})
    res = ex.run_experiment(cfg)
    assert ag.get_default_dtype() is np.float64
    assert "precision = float32" in (tmp_path / "config.ini").read_text()
    assert ex.reevaluate(tmp_path, tmp_path / "re").to_json() == res.ranking_report.to_json()
    with pytest.raises(ConfigurationError):
        tiny(tmp_path, **{"model.precision": "float16"}).validate()


def test_load_run_reads_artifacts(runs):
    back = ex.load_run(runs["text"].directory)
    assert back.ranking_report.to_json() == runs["text"].ranking_report.to_json()
    assert back.train_report.to_tsv() == runs["text"].train_report.to_tsv()


def test_build_encoder_rejects_unknown_kind(tmp_path):
    cfg = tiny(tmp_path)
    data = ex.prepare(cfg)
    cfg.item_encoder.kind = "ts0"
    with pytest.raises(ConfigurationError):
        ex.build_model(cfg, data)
