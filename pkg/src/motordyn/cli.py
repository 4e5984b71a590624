"""Command-line entry point: ``motordyn {datagen,train,finetune,eval,bench}``.

Every command reads one JSON experiment config (``--config``; the
half-hour desk protocol when omitted) and writes under ``--out``.  Flags
override the matching config keys.  Exit status is 0 on success, 1 for
usage or configuration problems and 2 for runtime failures such as a
diverged simulation or training run.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import (
    ConfigError, IntegrationDivergedError, InvalidInputError, MotorDynError, TrainingDivergedError,
)
from .experiment import (
    ExperimentConfig, datasets_for, desk_protocol, fine_tune_split, generate_clean_runs, generate_noisy_runs,
    load_datasets, make_splits, write_datasets,
)
from .models import ModelKind, build_model, load_checkpoint, save_checkpoint
from .objectives import evaluate_rescaled, smape_sc_histogram
from .pipeline import window_dataset
from .train import fine_tune, run_benchmark_suite, train, write_benchmark_csv

log = logging.getLogger("motordyn")

LOSS_ALIASES = {"tv": "tv_weighted_mse", "tv_weighted_mse": "tv_weighted_mse", "mse": "mse"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# commands -----------------------------------------------------------------------

def cmd_datagen(cfg: ExperimentConfig):
    """Simulate the clean and corrupted scenario lists and write run directories plus a manifest."""
    clean = generate_clean_runs(cfg)
    noisy = generate_noisy_runs(cfg)
    root = write_datasets(cfg, clean, noisy)
    log.info("wrote %d clean and %d noisy runs under %s", len(clean), len(noisy), root)
    return root


def _checkpoint_metadata(cfg, splits, history, stage):
    return {
        "stage": stage,
        "train_config": (cfg.train if stage == "train" else cfg.finetune).to_dict(),
        "norm_stats": splits.norm_stats.to_dict(),
        "train_stride": cfg.train_stride,
        "best_epoch": history.best_epoch if history is not None else None,
        "best_val_loss": min(history.val_loss) if history is not None and len(history) else None,
        "epochs_completed": len(history) if history is not None else 0,
    }


def cmd_train(cfg: ExperimentConfig, name="train"):
    """Train ``cfg.model`` on the clean training split; writes ``model.mdyn`` and ``history.jsonl``."""
    clean, noisy = load_datasets(cfg)
    splits = make_splits(cfg, clean, noisy)
    ds = datasets_for(cfg, splits)
    out = Path(cfg.out_dir) / name
    out.mkdir(parents=True, exist_ok=True)
    model = build_model(cfg.model)
    model, history = train(model, ds["train"], ds["val"], cfg.train, log_path=out / "history.jsonl")
    with open(out / "datasets.json", "w") as fh:
        json.dump({k: v.manifest() for k, v in ds.items()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    path = save_checkpoint(model, out / "model.mdyn", _checkpoint_metadata(cfg, splits, history, "train"))
    return path


def cmd_finetune(cfg: ExperimentConfig, checkpoint=None, name="finetune"):
    """Fine-tune a checkpoint on the corrupted fine-tune split (one run in five held out for early stopping)."""
    checkpoint = Path(checkpoint) if checkpoint else Path(cfg.out_dir) / "train" / "model.mdyn"
    model, header = load_checkpoint(checkpoint)
    clean, noisy = load_datasets(cfg)
    splits = make_splits(cfg, clean, noisy)
    if not splits.finetune:
        raise InvalidInputError("no corrupted runs available for fine-tuning")
    fit_runs, val_runs = fine_tune_split(splits.finetune, cfg.seed)
    mc = model.config
    fit = window_dataset(fit_runs, mc.window_length, cfg.train_stride, mc.io_contract, stats=splits.norm_stats)
    val = window_dataset(val_runs, mc.window_length, mc.window_length, mc.io_contract, stats=splits.norm_stats)
    out = Path(cfg.out_dir) / name
    out.mkdir(parents=True, exist_ok=True)
    model, history = fine_tune(model, fit, val, cfg.finetune, log_path=out / "history.jsonl")
    meta = _checkpoint_metadata(cfg, splits, history, "finetune")
    meta["parent_checkpoint"] = header.get("metadata", {})
    return save_checkpoint(model, out / "model.mdyn", meta)


def cmd_eval(cfg: ExperimentConfig, checkpoint=None, split="test", name=None):
    """Per-channel metrics JSON and one SMAPE-vs-SC histogram CSV per target channel."""
    checkpoint = Path(checkpoint) if checkpoint else Path(cfg.out_dir) / "train" / "model.mdyn"
    model, header = load_checkpoint(checkpoint)
    clean, noisy = load_datasets(cfg)
    splits = make_splits(cfg, clean, noisy)
    runs = splits.runs(split)
    if not runs:
        raise InvalidInputError(f"split {split!r} has no runs")
    mc = model.config
    ds = window_dataset(runs, mc.window_length, mc.window_length, mc.io_contract, stats=splits.norm_stats)
    report, y, y_hat = evaluate_rescaled(model, ds, splits.norm_stats, return_series=True)
    name = name or f"{checkpoint.parent.name}_{split}"
    out = Path(cfg.out_dir) / "eval"
    out.mkdir(parents=True, exist_ok=True)
    report.to_json(out / f"{name}_metrics.json")
    h = cfg.histogram
    paths = [out / f"{name}_metrics.json"]
    if mc.io_contract == "sequence":
        for ch in ds.target_channels:
            hist = smape_sc_histogram(y[ch], y_hat[ch], window=h["window"], stride=h["stride"],
                                      sc_bins=h["sc_bins"], smape_bins=h["smape_bins"])
            p = out / f"{name}_sc_hist_{ch}.csv"
            hist.to_csv(p)
            paths.append(p)
    else:
        log.info("pointwise model: predictions are not contiguous series, histogram skipped")
    return paths


def cmd_bench(cfg: ExperimentConfig):
    clean, noisy = load_datasets(cfg)
    splits = make_splits(cfg, clean, noisy)
    kinds = [ModelKind(k) for k in cfg.bench.get("kinds", [k.value for k in ModelKind])]
    windows = [int(w) for w in cfg.bench.get("windows", [cfg.model.window_length])]
    rows = run_benchmark_suite(kinds, windows, splits.train, splits.val, splits.norm_stats, cfg.train,
                               train_stride=cfg.train_stride, hidden_size=cfg.model.hidden_size,
                               model_seed=cfg.model.seed)
    out = Path(cfg.out_dir) / "bench"
    out.mkdir(parents=True, exist_ok=True)
    write_benchmark_csv(rows, out / "results.csv")
    return out / "results.csv"


# argument handling --------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="experiment JSON (default: built-in desk protocol)")
    p.add_argument("--seed", type=int, help="master seed; also reseeds every stochastic stage")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _train_flags(p, lr_help):
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float, help=lr_help)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--loss", choices=sorted(LOSS_ALIASES))
    p.add_argument("--tv-weighting", choices=["sample", "channel"],
                   help="one TV weight per window (sample) or per output channel")


def build_parser():
    parser = _Parser(prog="motordyn", description="Induction-motor sequence modeling experiments.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("datagen", help="simulate clean and corrupted runs")
    _common(p)

    p = sub.add_parser("train", help="train the configured model on clean data")
    _common(p)
    _train_flags(p, "learning rate")
    p.add_argument("--kind", choices=[k.value for k in ModelKind])
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int, help="training window stride")
    p.add_argument("--name", default="train", help="subdirectory of --out for the outputs")

    p = sub.add_parser("finetune", help="fine-tune a checkpoint on corrupted data")
    _common(p)
    _train_flags(p, "learning rate (default 1e-4)")
    p.add_argument("--checkpoint")
    p.add_argument("--stride", type=int)
    p.add_argument("--name", default="finetune")

    p = sub.add_parser("eval", help="metrics and SMAPE-vs-SC histograms for a checkpoint")
    _common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--split", default="test", choices=["train", "val", "finetune", "test"])
    p.add_argument("--name", help="output file prefix")

    p = sub.add_parser("bench", help="train and score every kind over a window sweep")
    _common(p)
    _train_flags(p, "learning rate")
    p.add_argument("--kinds", nargs="+", choices=[k.value for k in ModelKind])
    p.add_argument("--windows", nargs="+", type=int)
    p.add_argument("--stride", type=int)
    return parser


def _reseed(cfg, seed):
    return cfg.with_(seed=seed, noise=replace(cfg.noise, seed=seed), model=cfg.model.with_(seed=seed),
                     train=cfg.train.with_(seed=seed), finetune=cfg.finetune.with_(seed=seed))


def resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else desk_protocol(args.seed or 0)
    if args.seed is not None:
        cfg = _reseed(cfg, args.seed)
    if args.out:
        cfg = cfg.with_(out_dir=args.out)
    stage = "finetune" if args.command == "finetune" else "train"
    tc = getattr(cfg, stage)
    changes = {}
    if getattr(args, "epochs", None) is not None:
        changes["epochs"] = args.epochs
    if getattr(args, "lr", None) is not None:
        changes["learning_rate"] = args.lr
    if getattr(args, "batch_size", None) is not None:
        changes["batch_size"] = args.batch_size
    if getattr(args, "loss", None) is not None:
        changes["loss"] = LOSS_ALIASES[args.loss]
    if getattr(args, "tv_weighting", None) is not None:
        changes["tv_weighting"] = args.tv_weighting
    if changes:
        cfg = cfg.with_(**{stage: tc.with_(**changes)})
    mchanges = {}
    if getattr(args, "kind", None):
        mchanges["kind"] = ModelKind(args.kind)
    if getattr(args, "window", None):
        mchanges["window_length"] = args.window
    if mchanges:
        cfg = cfg.with_(model=cfg.model.with_(**mchanges))
    if getattr(args, "stride", None):
        cfg = cfg.with_(train_stride=args.stride)
    if args.command == "bench":
        bench = dict(cfg.bench)
        if args.kinds:
            bench["kinds"] = args.kinds
        if args.windows:
            bench["windows"] = args.windows
        cfg = cfg.with_(bench=bench)
    return cfg


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ConfigError, InvalidInputError, ValueError) as exc:
        print(f"motordyn: config error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "datagen":
            cmd_datagen(cfg)
        elif args.command == "train":
            cmd_train(cfg, args.name)
        elif args.command == "finetune":
            cmd_finetune(cfg, args.checkpoint, args.name)
        elif args.command == "eval":
            cmd_eval(cfg, args.checkpoint, args.split, args.name)
        elif args.command == "bench":
            cmd_bench(cfg)
    except ConfigError as exc:
        print(f"motordyn: config error: {exc}", file=sys.stderr)
        return 1
    except (IntegrationDivergedError, TrainingDivergedError) as exc:
        print(f"motordyn: diverged: {exc}", file=sys.stderr)
        return 2
    except (MotorDynError, OSError) as exc:
        print(f"motordyn: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
