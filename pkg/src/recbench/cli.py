"""Command-line entry point: ``recbench {gen,prepare,train,eval,compare,cost}``.

Exit status is 0 on success, 2 for configuration or input errors and 3 when a
training run collapsed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import catalog, experiment, synthgen
from .errors import ConfigurationError, EmptyInputError, ParseError
from .experiment import ExperimentConfig

EXIT_OK, EXIT_CONFIG, EXIT_COLLAPSE = 0, 2, 3

# flag → config key; each flag mirrors one ExperimentConfig entry
TRAIN_FLAGS = {
    "backbone": "model.backbone",
    "item_encoder": "item_encoder.kind",
    "adapter_depth": "item_encoder.adapter_depth",
    "fusion_mode": "item_encoder.fusion_mode",
    "fusion_depth": "item_encoder.fusion_depth",
    "lr": "train.lr",
    "lr_modality": "train.lr_modality",
    "epochs": "train.epochs",
    "batch_size": "train.batch_size",
    "dim": "train.dim",
    "dropout": "train.dropout",
    "weight_decay": "train.weight_decay",
    "patience": "train.patience",
    "eval_n": "eval.n",
    "warm_k": "eval.warm_k",
}


def _parse_sets(pairs: list[str] | None) -> dict[str, str]:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigurationError(f"--set expects section.key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _overrides(args) -> dict[str, str]:
    overrides = {}
    data = getattr(args, "data", None)
    if data:
        d = Path(data)
        overrides.update({"data.source": "files", "data.interactions": str(d / "interactions.tsv"),
                          "data.items": str(d / "items.tsv")})
    for flag, key in TRAIN_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = str(value)
    overrides.update(_parse_sets(getattr(args, "set", None)))
    if getattr(args, "seed", None) is not None:
        overrides["synth.seed" if args.command == "gen" else "train.seed"] = str(args.seed)
    return overrides


def _base_config(args, output_dir: str | None) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, output_dir)
    else:
        cfg = ExperimentConfig(output_dir=output_dir or "run")
    return cfg.with_overrides(_overrides(args))


def cmd_gen(args) -> int:
    cfg = _base_config(args, None)
    cfg.synth.validate()
    items, log_, truth = synthgen.generate(cfg.synth)
    paths = synthgen.write_dataset(args.out, items, log_, truth, cfg.synth)
    print(f"wrote {log_.num_interactions} interactions for {log_.n_users} users and "
          f"{log_.n_items} items to {paths['interactions'].parent}")
    return EXIT_OK


def cmd_prepare(args) -> int:
    cfg = _base_config(args, args.out)
    cfg.validate()
    data = experiment.prepare(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    catalog.write_interactions(data.log, out / "interactions.tsv")
    catalog.write_items(data.items, data.log.item_keys, out / "items.tsv")
    catalog.write_histogram(catalog.popularity_histogram(data.split.train, data.split.n_items),
                            out / "popularity.tsv")
    (out / "stats.json").write_text(experiment.dump_stats(data), encoding="utf-8")
    print(experiment.dump_stats(data), end="")
    return EXIT_OK


def cmd_train(args) -> int:
    if args.grid:
        grid_path = Path(args.grid)
        if not grid_path.exists():
            raise ConfigurationError(f"grid file {grid_path} does not exist")
        overrides = _overrides(args)
        configs = [c.with_overrides(overrides)
                   for c in experiment.expand_grid(grid_path.read_text(encoding="utf-8"), args.out)]
    else:
        configs = [_base_config(args, args.out)]
    for cfg in configs:
        cfg.validate()  # every cell is checked before any training starts
    status = EXIT_OK
    for cfg in configs:
        result = experiment.run_experiment(cfg)
        if result.ranking_report is not None:
            print(f"# {cfg.label()} -> {result.directory}")
            print(result.ranking_report.to_tsv(), end="")
        if result.collapsed:
            print(f"# {cfg.label()}: training collapsed at epoch {result.train_report.collapse_epoch}",
                  file=sys.stderr)
            status = EXIT_COLLAPSE
    return status


def cmd_eval(args) -> int:
    rep = experiment.reevaluate(args.run, args.out)
    print(rep.to_tsv(), end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    reports = experiment.read_reports(args.reports)
    try:
        rows = experiment.compare(reports)
    except experiment.ComparisonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    table = experiment.comparison_table(rows, reports[0].n if reports else 10)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def cmd_cost(args) -> int:
    table = experiment.cost_report(experiment.read_train_reports(args.reports))
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recbench", description="ID vs modality recommender benchmark")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def config_args(p):
        p.add_argument("--config", help="config file with [data], [synth], [model], ... sections")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one config key")

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    config_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("prepare", help="filter, truncate and split; write statistics")
    config_args(p)
    p.add_argument("--data", help="directory holding interactions.tsv and items.tsv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train and evaluate one config or a grid")
    config_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="artifact directory (grid cells become subdirectories)")
    p.add_argument("--data", help="directory holding interactions.tsv and items.tsv")
    p.add_argument("--grid", help="grid file: base sections plus a [grid] section")
    for flag in TRAIN_FLAGS:
        p.add_argument("--" + flag.replace("_", "-"), dest=flag)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="re-evaluate a finished run from its checkpoint")
    p.add_argument("--run", required=True)
    p.add_argument("--out", help="output stem for the ranking report (default: inside the run)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="relative improvement of the best MoRec over the best IDRec")
    p.add_argument("reports", nargs="*")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("cost", help="parameter counts and seconds per epoch")
    p.add_argument("reports", nargs="*")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cost)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ParseError, EmptyInputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
