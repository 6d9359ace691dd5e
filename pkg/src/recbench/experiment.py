"""Experiment configuration, the end-to-end run pipeline, comparison and cost tables."""

from __future__ import annotations

import configparser
import hashlib
import itertools
import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import autograd as ag
from . import catalog, synthgen
from . import encoders as enc
from .backbones import DSSM, DssmSpec, Recommender, SASRec, SasrecSpec
from .catalog import DatasetSplit, InteractionLog, ItemTable
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigurationError
from .evaluation import RankingReport, evaluate
from .synthgen import GenConfig
from .training import HyperParams, TrainReport, train

log = logging.getLogger(__name__)

ENCODER_KINDS = ("id", "text_e2e", "frozen", "linear", "fusion")
BACKBONES = ("sasrec", "dssm")


@dataclass
class DataConfig:
    source: str = "synth"           # "synth" or "files"
    interactions: str = ""
    items: str = ""
    schema: str = "0,1,2"
    min_user_interactions: int = 5
    max_len: int = 23
    warm_k: int = 0                 # drop items below this count before splitting; 0 keeps all


@dataclass
class ModelConfig:
    backbone: str = "sasrec"
    sasrec_blocks: int = 2
    sasrec_heads: int = 2
    dssm_tower_layers: int = 0
    precision: str = "float64"      # or "float32" for speed


@dataclass
class EncoderConfig:
    kind: str = "id"
    adapter_depth: int = 0
    fusion_mode: str = "add"
    fusion_depth: int = 0
    fusion_modality: str = "text"   # "text" or "features"
    text_width: int = 64
    text_blocks: int = 2
    text_heads: int = 2
    max_title_len: int = 30
    mlm_epochs: int = 0
    mlm_lr: float = 1e-3            # pre-training stage only; fine-tuning uses train.lr_modality


@dataclass
class EvalConfig:
    n: int = 10
    warm_k: str = "20,50,200"
    exclude_history: bool = False

    def warm_list(self) -> list[int]:
        try:
            return [int(k) for k in self.warm_k.replace(" ", "").split(",") if k]
        except ValueError:
            raise ConfigurationError(f"eval.warm_k {self.warm_k!r} is not a list of integers") from None


SECTIONS = {
    "data": DataConfig,
    "synth": GenConfig,
    "model": ModelConfig,
    "item_encoder": EncoderConfig,
    "train": HyperParams,
    "eval": EvalConfig,
}


@dataclass
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    synth: GenConfig = field(default_factory=GenConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    item_encoder: EncoderConfig = field(default_factory=EncoderConfig)
    train: HyperParams = field(default_factory=HyperParams)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output_dir: str = "run"

    # -- parsing -----------------------------------------------------------

    @classmethod
    def from_mapping(cls, values: dict[str, dict[str, str]], output_dir: str | None = None) -> "ExperimentConfig":
        cfg = cls()
        for section, entries in values.items():
            if section == "grid":
                continue
            if section not in SECTIONS:
                raise ConfigurationError(f"unknown config section [{section}]")
            current = getattr(cfg, section)
            known = {f.name: f for f in fields(current)}
            updates = {}
            for key, raw in entries.items():
                if key not in known:
                    raise ConfigurationError(f"unknown key {key!r} in section [{section}]")
                updates[key] = _coerce(raw, getattr(current, key), known[key].type, f"{section}.{key}")
            setattr(cfg, section, _rebuild(current, updates))
        if output_dir is not None:
            cfg.output_dir = output_dir
        return cfg

    @classmethod
    def from_text(cls, text: str, output_dir: str | None = None) -> "ExperimentConfig":
        return cls.from_mapping(_parse_ini(text), output_dir)

    @classmethod
    def from_file(cls, path, output_dir: str | None = None) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file {path} does not exist")
        return cls.from_text(path.read_text(encoding="utf-8"), output_dir)

    def with_overrides(self, overrides: dict[str, str]) -> "ExperimentConfig":
        """Apply ``{"section.key": "value"}`` overrides."""
        grouped: dict[str, dict[str, str]] = {}
        for dotted, value in overrides.items():
            if "." not in dotted:
                raise ConfigurationError(f"override {dotted!r} must look like section.key")
            section, key = dotted.split(".", 1)
            grouped.setdefault(section, {})[key] = str(value)
        merged = _parse_ini(self.snapshot())
        train_keys = grouped.get("train", {})
        if "lr" in train_keys and "lr_modality" not in train_keys and self.train.lr_modality == self.train.lr:
            # the modality rate was following lr, so it keeps following it
            merged["train"]["lr_modality"] = "none"
        for section, entries in grouped.items():
            merged.setdefault(section, {}).update(entries)
        return ExperimentConfig.from_mapping(merged, self.output_dir)

    # -- validation and snapshot -------------------------------------------

    def validate(self) -> None:
        d = self.data
        if d.source not in ("synth", "files"):
            raise ConfigurationError(f"data.source must be synth or files, got {d.source!r}")
        if d.source == "files":
            for name in ("interactions", "items"):
                p = getattr(d, name)
                if not p or not Path(p).exists():
                    raise ConfigurationError(f"data.{name} path {p!r} does not exist")
                if Path(p).name.startswith(synthgen.GROUND_TRUTH_PREFIX):
                    raise ConfigurationError(f"data.{name} points at a ground-truth file; models may not read it")
        else:
            self.synth.validate()
        parse_schema(d.schema)
        if d.min_user_interactions < 3:
            raise ConfigurationError("data.min_user_interactions must be at least 3 for leave-one-out")
        if d.max_len < 3:
            raise ConfigurationError("data.max_len must be at least 3")
        if self.model.precision not in ("float64", "float32"):
            raise ConfigurationError(f"model.precision must be float64 or float32, got {self.model.precision!r}")
        if self.model.backbone not in BACKBONES:
            raise ConfigurationError(f"model.backbone must be one of {BACKBONES}, got {self.model.backbone!r}")
        e = self.item_encoder
        if e.kind not in ENCODER_KINDS:
            raise ConfigurationError(f"item_encoder.kind must be one of {ENCODER_KINDS}, got {e.kind!r}")
        if e.kind == "frozen" and e.adapter_depth not in enc.ADAPTER_DEPTHS:
            raise ConfigurationError(f"adapter_depth must be one of {enc.ADAPTER_DEPTHS}")
        if e.kind == "fusion":
            enc.FusionSpec(e.fusion_mode, e.fusion_depth)
            if e.fusion_depth not in enc.FUSION_DEPTHS:
                raise ConfigurationError(f"fusion_depth must be one of {enc.FUSION_DEPTHS}")
            if e.fusion_modality not in ("text", "features"):
                raise ConfigurationError("fusion_modality must be text or features")
        if e.text_width % e.text_heads or self.train.dim % self.model.sasrec_heads:
            raise ConfigurationError("widths must be divisible by the head counts")
        if self.eval.n < 1:
            raise ConfigurationError("eval.n must be positive")
        self.eval.warm_list()

    def snapshot(self) -> str:
        """Every setting, defaults included, as section/key text."""
        lines = []
        for section in SECTIONS:
            lines.append(f"[{section}]")
            obj = getattr(self, section)
            for f in fields(obj):
                lines.append(f"{f.name} = {_format(getattr(obj, f.name))}")
            lines.append("")
        return "\n".join(lines)

    def config_hash(self) -> str:
        return hashlib.sha256(self.snapshot().encode()).hexdigest()[:16]

    def label(self) -> str:
        e = self.item_encoder
        name = {"id": "id", "text_e2e": "text_e2e", "linear": "linear"}.get(e.kind)
        if e.kind == "frozen":
            name = f"frozen({e.adapter_depth})"
        elif e.kind == "fusion":
            name = f"fusion({e.fusion_mode},{e.fusion_depth},{e.fusion_modality})"
        return f"{self.model.backbone}/{name}"


def _rebuild(obj, updates: dict):
    if isinstance(obj, HyperParams) and "lr" in updates and "lr_modality" not in updates:
        # an explicit lr without lr_modality re-derives the modality rate
        updates = dict(updates, lr_modality=None)
    try:
        return replace(obj, **updates)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(raw: str, current, annotation, where: str):
    text = str(raw).strip()
    ann = str(annotation)
    if text.lower() == "none" and "None" in ann:
        return None
    try:
        if "bool" in ann:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if ann.startswith("int"):
            return int(text)
        if ann.startswith("float"):
            return float(text)
    except ValueError:
        raise ConfigurationError(f"{where}: cannot read {text!r} as {ann}") from None
    return text


def _parse_ini(text: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    return {s: dict(parser.items(s)) for s in parser.sections()}


def parse_schema(text: str) -> tuple[int, int, int]:
    try:
        cols = tuple(int(c) for c in text.split(","))
    except ValueError:
        raise ConfigurationError(f"data.schema {text!r} is not three comma-separated integers") from None
    if len(cols) != 3 or len(set(cols)) != 3 or min(cols) < 0:
        raise ConfigurationError(f"data.schema {text!r} must name three distinct columns")
    return cols  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def expand_grid(text: str, output_dir: str) -> list[ExperimentConfig]:
    """Cartesian product over a ``[grid]`` section of ``section.key = v1, v2, ...`` lines.

    The remaining sections form the base config. Each cell writes to a
    subdirectory of ``output_dir`` named after its grid values.
    """
    values = _parse_ini(text)
    grid = values.get("grid", {})
    base = ExperimentConfig.from_mapping(values, output_dir)
    if not grid:
        return [base]
    keys = list(grid)
    options = [[v.strip() for v in grid[k].split(",") if v.strip()] for k in keys]
    if any(not o for o in options):
        raise ConfigurationError("every grid key needs at least one value")
    configs = []
    for combo in itertools.product(*options):
        name = "__".join(f"{k.split('.')[-1]}-{v}" for k, v in zip(keys, combo))
        cfg = base.with_overrides(dict(zip(keys, combo)))
        cfg.output_dir = str(Path(output_dir) / name)
        configs.append(cfg)
    return configs


# ---------------------------------------------------------------------------
# data preparation
# ---------------------------------------------------------------------------

@dataclass
class PreparedData:
    log: InteractionLog
    split: DatasetSplit
    items: ItemTable
    groups: dict[str, np.ndarray]

    def dataset_hash(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.split.n_items).encode())
        for seq in self.split.train:
            h.update(np.asarray(seq, dtype="<i8").tobytes())
            h.update(b"|")
        h.update(np.asarray(self.split.valid, dtype="<i8").tobytes())
        h.update(np.asarray(self.split.test, dtype="<i8").tobytes())
        h.update("\t".join(str(k) for k in self.log.item_keys).encode())
        return h.hexdigest()[:16]

    def stats(self) -> dict[str, int]:
        return {
            "users": self.split.n_users,
            "items": self.split.n_items,
            "interactions": self.log.num_interactions,
            **{f"group_{k}": len(v) for k, v in self.groups.items()},
        }


def load_raw(cfg: ExperimentConfig) -> tuple[InteractionLog, ItemTable | None, str | None]:
    """The unfiltered log plus, for synthetic data, the aligned item table."""
    if cfg.data.source == "synth":
        items, log_, _ = synthgen.generate(cfg.synth)
        return log_, items, None
    return catalog.load_interactions(cfg.data.interactions, parse_schema(cfg.data.schema)), None, cfg.data.items


def prepare(cfg: ExperimentConfig) -> PreparedData:
    """Load or generate, filter users, apply the optional warm filter, truncate and split."""
    raw, items, items_path = load_raw(cfg)
    log_ = catalog.filter_min_interactions(raw, cfg.data.min_user_interactions)
    if cfg.data.warm_k:
        log_ = catalog.warm_k_filter(log_, cfg.data.warm_k)
    log_ = catalog.truncate_user_sequences(log_, cfg.data.max_len)
    split = catalog.leave_one_out_split(log_)
    if items is not None:
        items = items.subset(log_.item_keys)
    else:
        items = catalog.load_items(items_path, log_.item_keys, max_title_len=cfg.item_encoder.max_title_len)
    part = catalog.cold_new_partition(split.train, split.test, split.n_items)
    groups = {"cold": part.cold, "new": part.new, "other": part.other}
    counts = log_.item_counts()
    for k in cfg.eval.warm_list():
        groups[f"warm-{k}"] = np.flatnonzero(counts[split.test] >= k)
    return PreparedData(log_, split, items, groups)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

def _text_spec(cfg: ExperimentConfig, items: ItemTable) -> enc.TextEncoderSpec:
    e = cfg.item_encoder
    return enc.TextEncoderSpec(len(items.vocab), e.max_title_len, e.text_width, e.text_blocks,
                               e.text_heads, cfg.train.dropout)


def _check_payload(cfg: ExperimentConfig, items: ItemTable) -> None:
    e = cfg.item_encoder
    needs_text = e.kind == "text_e2e" or (e.kind == "fusion" and e.fusion_modality == "text")
    needs_features = e.kind in ("frozen", "linear") or (e.kind == "fusion" and e.fusion_modality == "features")
    if needs_text and items.tokens is None:
        raise ConfigurationError(f"{e.kind} encoder needs item titles, but the item file has none")
    if needs_features and items.features is None:
        raise ConfigurationError(f"{e.kind} encoder needs feature vectors, but the item file has none")


def build_encoder(cfg: ExperimentConfig, items: ItemTable, rng: np.random.Generator) -> enc.ItemEncoder:
    _check_payload(cfg, items)
    e, d = cfg.item_encoder, cfg.train.dim
    if e.kind == "id":
        return enc.IdEncoder(items.n_items, d, rng)
    if e.kind == "text_e2e":
        return enc.TextEncoder(items.tokens, d, _text_spec(cfg, items), rng)
    if e.kind == "frozen":
        return enc.FrozenFeatureEncoder(items.features, d, e.adapter_depth, rng)
    if e.kind == "linear":
        return enc.LinearFeatureEncoder(items.features, d, rng)
    if e.kind != "fusion":
        raise ConfigurationError(f"item_encoder.kind must be one of {ENCODER_KINDS}, got {e.kind!r}")
    id_enc = enc.IdEncoder(items.n_items, d, rng)
    if e.fusion_modality == "text":
        modality = enc.TextEncoder(items.tokens, d, _text_spec(cfg, items), rng)
    else:
        modality = enc.LinearFeatureEncoder(items.features, d, rng)
    return enc.FusedEncoder(id_enc, modality, enc.FusionSpec(e.fusion_mode, e.fusion_depth), rng)


def build_model(cfg: ExperimentConfig, data: PreparedData) -> Recommender:
    rng = np.random.default_rng([cfg.train.seed, 0])
    encoder = build_encoder(cfg, data.items, rng)
    if cfg.model.backbone == "sasrec":
        spec = SasrecSpec(cfg.train.dim, cfg.model.sasrec_blocks, cfg.model.sasrec_heads,
                          cfg.data.max_len - 1, cfg.train.dropout)
        return SASRec(encoder, spec, rng)
    return DSSM(encoder, data.split.n_users, DssmSpec(cfg.train.dim, cfg.model.dssm_tower_layers), rng)


def _linear(a: int, b: int) -> int:
    return a * b + b


def _block(d: int) -> int:
    # four attention projections, a 4d feed-forward and two layer norms
    return 4 * _linear(d, d) + _linear(d, 4 * d) + _linear(4 * d, d) + 4 * d


def count_parameters(cfg: ExperimentConfig, n_users: int, n_items: int, vocab_size: int = 0,
                     feature_dim: int = 0) -> int:
    """Closed-form parameter count of the model :func:`build_model` would create."""
    e, d = cfg.item_encoder, cfg.train.dim
    w = e.text_width
    text = vocab_size * w + (e.max_title_len + 1) * w + e.text_blocks * _block(w) + 2 * w + _linear(w, d)
    linear = _linear(feature_dim, d) + _linear(d, d)
    if e.kind == "id":
        item = n_items * d
    elif e.kind == "text_e2e":
        item = text
    elif e.kind == "frozen":
        k = e.adapter_depth
        item = (_linear(feature_dim, d) + (k - 1) * _linear(d, d) + _linear(d, d)) if k else _linear(feature_dim, d)
    elif e.kind == "linear":
        item = linear
    else:
        item = n_items * d + (text if e.fusion_modality == "text" else linear)
        item += (_linear(2 * d, d) if e.fusion_mode == "con" else 0) + e.fusion_depth * _linear(d, d)
    if cfg.model.backbone == "sasrec":
        return item + (cfg.data.max_len - 1) * d + cfg.model.sasrec_blocks * _block(d) + 2 * d
    return item + n_users * d + cfg.model.dssm_tower_layers * _linear(d, d)


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

CONFIG_FILE = "config.ini"
TRAIN_REPORT = "train_report.tsv"
RANKING_STEM = "ranking_report"
CHECKPOINT = "checkpoint.bin"


@dataclass
class RunResult:
    directory: Path
    train_report: TrainReport
    ranking_report: RankingReport | None

    @property
    def collapsed(self) -> bool:
        return self.train_report.collapsed


def _metadata(cfg: ExperimentConfig, data: PreparedData, rep: TrainReport) -> dict[str, Any]:
    return {
        "label": cfg.label(),
        "backbone": cfg.model.backbone,
        "item_encoder": cfg.item_encoder.kind,
        "family": "IDRec" if cfg.item_encoder.kind == "id" else "MoRec",
        "seed": cfg.train.seed,
        "config_hash": cfg.config_hash(),
        "dataset_hash": data.dataset_hash(),
        "best_epoch": rep.best_epoch,
        "collapsed": rep.collapsed,
    }


def evaluate_run(cfg: ExperimentConfig, data: PreparedData, model: Recommender,
                 rep: TrainReport) -> RankingReport:
    return evaluate(model, data.split, data.groups, n=cfg.eval.n, stage="test",
                    exclude_history=cfg.eval.exclude_history, metadata=_metadata(cfg, data, rep))


def run_experiment(cfg: ExperimentConfig, data: PreparedData | None = None, on_epoch=None) -> RunResult:
    """Prepare data, train, evaluate on test, and write every artifact to ``cfg.output_dir``.

    A run whose training never produced a finite validated model gets a train
    report and config snapshot but no ranking report or checkpoint.
    """
    cfg.validate()
    data = data if data is not None else prepare(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_FILE).write_text(cfg.snapshot(), encoding="utf-8")
    with ag.default_dtype(cfg.model.precision):
        model = build_model(cfg, data)
        e = cfg.item_encoder
        if e.mlm_epochs and (e.kind == "text_e2e" or (e.kind == "fusion" and e.fusion_modality == "text")):
            text_enc = model.item_encoder if e.kind == "text_e2e" else model.item_encoder.modality
            enc.mlm_pretrain(text_enc, epochs=e.mlm_epochs, seed=cfg.train.seed, lr=e.mlm_lr)
        rep = train(model, data.split, cfg.train, on_epoch=on_epoch)
        (out / TRAIN_REPORT).write_text(rep.to_tsv(), encoding="utf-8")
        ranking = None
        if rep.best_epoch is not None:
            save_checkpoint(out / CHECKPOINT, model.state_dict())
            ranking = evaluate_run(cfg, data, model, rep)
            ranking.write(out / RANKING_STEM)
        else:
            log.warning("%s: no finite validated epoch; ranking report and checkpoint skipped", out)
    return RunResult(out, rep, ranking)


def load_run(directory) -> RunResult:
    """Read back the artifacts ``run_experiment`` left in ``directory``."""
    d = Path(directory)
    if not (d / TRAIN_REPORT).exists():
        raise ConfigurationError(f"{d} holds no train report")
    rep = TrainReport.from_tsv((d / TRAIN_REPORT).read_text(encoding="utf-8"))
    ranking_path = d / f"{RANKING_STEM}.json"
    ranking = RankingReport.read(ranking_path) if ranking_path.exists() else None
    return RunResult(d, rep, ranking)


def reevaluate(run_dir, output_stem=None) -> RankingReport:
    """Rebuild a finished run from its snapshot and checkpoint and evaluate it again."""
    run_dir = Path(run_dir)
    for name in (CONFIG_FILE, CHECKPOINT, TRAIN_REPORT):
        if not (run_dir / name).exists():
            raise ConfigurationError(f"{run_dir / name} does not exist")
    cfg = ExperimentConfig.from_file(run_dir / CONFIG_FILE, str(run_dir))
    cfg.validate()
    data = prepare(cfg)
    rep = TrainReport.from_tsv((run_dir / TRAIN_REPORT).read_text(encoding="utf-8"))
    with ag.default_dtype(cfg.model.precision):
        model = build_model(cfg, data)
        model.load_state_dict(load_checkpoint(run_dir / CHECKPOINT))
        model.eval()
        ranking = evaluate_run(cfg, data, model, rep)
    ranking.write(output_stem if output_stem is not None else run_dir / RANKING_STEM)
    return ranking


# ---------------------------------------------------------------------------
# comparison and cost tables
# ---------------------------------------------------------------------------

class ComparisonError(ValueError):
    """Reports cannot be compared."""


def relative_improvement(best_morec: float, best_idrec: float) -> float:
    if best_idrec == 0:
        return 0.0 if best_morec == 0 else float("inf")
    return (best_morec - best_idrec) / best_idrec


def format_percent(x: float) -> str:
    if not np.isfinite(x):
        return "inf"
    text = f"{100 * x:+.2f}%"
    return "0.00%" if text in ("+0.00%", "-0.00%") else text


@dataclass
class ComparisonRow:
    group: str
    metric: str
    idrec: float
    morec: float

    @property
    def improvement(self) -> float:
        return relative_improvement(self.morec, self.idrec)


def compare(reports: list[RankingReport]) -> list[ComparisonRow]:
    """Best MoRec against best IDRec per group and metric.

    Reports are split by their ``family`` metadata; when one side is empty the
    first report serves as the baseline and the others as candidates.
    """
    if not reports:
        return []
    ns = {r.n for r in reports}
    if len(ns) != 1:
        raise ComparisonError(f"reports use different cut-offs N: {sorted(ns)}")
    hashes = {r.metadata.get("dataset_hash") for r in reports}
    if len(hashes) != 1:
        raise ComparisonError(f"reports come from different datasets (hashes {sorted(map(str, hashes))})")
    base = [r for r in reports if r.metadata.get("family") == "IDRec"]
    cand = [r for r in reports if r.metadata.get("family") != "IDRec"]
    if not base or not cand:
        base, cand = reports[:1], reports[1:] or reports[:1]
    rows = []
    for group in reports[0].groups:
        for metric in ("hr", "ndcg"):
            b = [getattr(r.groups[group], metric) for r in base if group in r.groups]
            c = [getattr(r.groups[group], metric) for r in cand if group in r.groups]
            if b and c:
                rows.append(ComparisonRow(group, metric, max(b), max(c)))
    return rows


def comparison_table(rows: list[ComparisonRow], n: int = 10) -> str:
    lines = ["group\tmetric\tbest_idrec\tbest_morec\timprov"]
    for r in rows:
        lines.append(f"{r.group}\t{r.metric}@{n}\t{r.idrec:.6f}\t{r.morec:.6f}\t{format_percent(r.improvement)}")
    return "\n".join(lines) + "\n"


def cost_report(train_reports: dict[str, TrainReport]) -> str:
    """``config  params  seconds/epoch`` for each named train report."""
    lines = ["config\tparams\tseconds_per_epoch"]
    for name, rep in train_reports.items():
        lines.append(f"{name}\t{rep.num_parameters}\t{rep.seconds_per_epoch:.3f}")
    return "\n".join(lines) + "\n"


def read_reports(paths) -> list[RankingReport]:
    out = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            p = p / f"{RANKING_STEM}.json"
        if not p.exists() and not Path(str(p)[:-4] + ".json").exists():
            raise ConfigurationError(f"report {p} does not exist")
        out.append(RankingReport.read(p))
    return out


def read_train_reports(paths) -> dict[str, TrainReport]:
    out = {}
    for p in paths:
        p = Path(p)
        name = p.name if p.is_dir() else p.parent.name or p.stem
        if p.is_dir():
            p = p / TRAIN_REPORT
        if not p.exists():
            raise ConfigurationError(f"train report {p} does not exist")
        out[name] = TrainReport.from_tsv(p.read_text(encoding="utf-8"))
    return out


def dump_stats(data: PreparedData) -> str:
    return json.dumps(data.stats(), indent=2) + "\n"
