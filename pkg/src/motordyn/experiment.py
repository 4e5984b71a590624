"""File-based experiment configuration and the shared data-preparation steps.

One JSON document describes a whole experiment: which scenarios to
simulate (clean and sensor-corrupted), how to split them by run, the model
and the optimizer settings.  :func:`desk_protocol` returns the fixed-seed
half-hour configuration used by the acceptance suite.
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .models import ModelConfig, ModelKind
from .pipeline import SplitSpec, fit_normalization, split_runs, window_dataset
from .sim import (
    DEFAULT_SENSOR_NOISE, NoiseSpec, Scenario, add_sensor_noise, generate_run, load_runs, named_scenario,
    random_scenario, save_run, SCENARIO_NAMES,
)
from .train import FINE_TUNE_LR, TrainConfig


def resolve_scenario(entry) -> Scenario:
    """Accepts ``{"named": ...}``, ``{"random": seed}`` or a full scenario mapping."""
    if isinstance(entry, Scenario):
        return entry
    if not isinstance(entry, dict):
        raise ConfigError(f"scenario entry must be a mapping, got {entry!r}")
    duration = float(entry.get("duration", 40.0))
    if "named" in entry:
        return named_scenario(entry["named"], duration, int(entry.get("seed", 0)))
    if "random" in entry:
        kw = {k: float(entry[k]) for k in ("max_speed", "max_load") if k in entry}
        return random_scenario(int(entry["random"]), duration, **kw)
    if "speed_profile" in entry:
        return Scenario.from_dict(entry)
    raise ConfigError(f"cannot interpret scenario entry {entry!r}")


@dataclass
class ExperimentConfig:
    seed: int = 0
    out_dir: str = "motordyn_out"
    clean_scenarios: list = field(default_factory=list)
    noisy_scenarios: list = field(default_factory=list)
    noise: NoiseSpec = DEFAULT_SENSOR_NOISE
    split: dict = field(default_factory=lambda: {"train": 0.7, "val": 0.3})
    noisy_split: dict = field(default_factory=lambda: {"finetune": 0.2, "test": 0.8})
    model: ModelConfig = field(default_factory=lambda: ModelConfig(ModelKind.ENCDEC_DIAG_BIRNN_SKIP))
    train: TrainConfig = field(default_factory=TrainConfig)
    finetune: TrainConfig = field(default_factory=lambda: TrainConfig(learning_rate=FINE_TUNE_LR))
    train_stride: int = 10
    histogram: dict = field(default_factory=lambda: {"window": 100, "stride": 50, "sc_bins": 30,
                                                     "smape_bins": 30})
    bench: dict = field(default_factory=lambda: {"kinds": [k.value for k in ModelKind], "windows": [100]})

    def __post_init__(self):
        SplitSpec(self.split)
        SplitSpec(self.noisy_split)
        if "train" not in self.split or "val" not in self.split:
            raise ConfigError("split must define 'train' and 'val'")
        if "finetune" not in self.noisy_split or "test" not in self.noisy_split:
            raise ConfigError("noisy_split must define 'finetune' and 'test'")
        if self.train_stride < 1:
            raise ConfigError("train_stride must be >= 1")
        for entry in list(self.clean_scenarios) + list(self.noisy_scenarios):
            resolve_scenario(entry)

    def to_dict(self):
        return {
            "seed": self.seed,
            "out_dir": str(self.out_dir),
            "clean_scenarios": [s.to_dict() if isinstance(s, Scenario) else s for s in self.clean_scenarios],
            "noisy_scenarios": [s.to_dict() if isinstance(s, Scenario) else s for s in self.noisy_scenarios],
            "noise": self.noise.to_dict(),
            "split": dict(self.split),
            "noisy_split": dict(self.noisy_split),
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "finetune": self.finetune.to_dict(),
            "train_stride": self.train_stride,
            "histogram": dict(self.histogram),
            "bench": dict(self.bench),
        }

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        kw = dict(d)
        try:
            if "noise" in kw:
                kw["noise"] = NoiseSpec.from_dict(kw["noise"])
            if "model" in kw:
                kw["model"] = ModelConfig.from_dict(kw["model"])
            if "train" in kw:
                kw["train"] = TrainConfig.from_dict(kw["train"])
            if "finetune" in kw:
                kw["finetune"] = TrainConfig.from_dict({"learning_rate": FINE_TUNE_LR, **kw["finetune"]})
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        return cls(**kw)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def with_(self, **changes):
        return replace(self, **changes)

    # output layout
    @property
    def data_dir(self):
        return Path(self.out_dir) / "data"


DESK_EPOCHS = 40
DESK_STRIDE = 50


def desk_protocol(seed=0, out_dir="motordyn_out") -> ExperimentConfig:
    """Fixed-seed half-hour protocol: 45 clean runs of 40 s plus 20 corrupted runs.

    The clean set covers every named scenario once and fills the rest with
    seeded random programs; the corrupted runs use separate random programs.
    Training windows overlap by half (stride 50 at window 100) and both
    training stages run up to 40 epochs.
    """
    clean = [{"named": n, "duration": 40.0, "seed": seed} for n in SCENARIO_NAMES]
    clean += [{"random": 1000 + 100 * seed + i, "duration": 40.0} for i in range(45 - len(clean))]
    noisy = [{"random": 5000 + 100 * seed + i, "duration": 40.0} for i in range(20)]
    return ExperimentConfig(seed=seed, out_dir=out_dir, clean_scenarios=clean, noisy_scenarios=noisy,
                            noise=replace(DEFAULT_SENSOR_NOISE, seed=seed),
                            model=ModelConfig(ModelKind.ENCDEC_DIAG_BIRNN_SKIP, seed=seed),
                            train=TrainConfig(seed=seed, epochs=DESK_EPOCHS),
                            finetune=TrainConfig(seed=seed, learning_rate=FINE_TUNE_LR, epochs=DESK_EPOCHS),
                            train_stride=DESK_STRIDE)


def _threads():
    try:
        return max(1, int(os.environ.get("MOTORDYN_THREADS", "1")))
    except ValueError:
        raise ConfigError("MOTORDYN_THREADS must be an integer") from None


def _simulate_all(scenarios, prefix):
    scenarios = [resolve_scenario(s) for s in scenarios]
    ids = [f"{prefix}_{i:03d}_{s.name}" for i, s in enumerate(scenarios)]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        return list(pool.map(lambda a: generate_run(a[0], run_id=a[1]), zip(scenarios, ids)))


def generate_clean_runs(cfg: ExperimentConfig):
    return _simulate_all(cfg.clean_scenarios, "clean")


def generate_noisy_runs(cfg: ExperimentConfig):
    """Simulate the noisy-scenario list and corrupt each run with its own noise seed."""
    runs = _simulate_all(cfg.noisy_scenarios, "noisy")
    return [add_sensor_noise(r, replace(cfg.noise, seed=cfg.noise.seed + i)) for i, r in enumerate(runs)]


def write_datasets(cfg: ExperimentConfig, clean, noisy):
    root = cfg.data_dir
    manifest = {"runs": [], "config": cfg.to_dict()}
    for group, runs in (("clean", clean), ("noisy", noisy)):
        for run in runs:
            save_run(run, root / group / run.run_id)
            manifest["runs"].append({"group": group, "run_id": run.run_id, "seed": run.meta.get("seed"),
                                     "scenario": run.meta.get("scenario", {}).get("name"),
                                     "samples": len(run)})
    with open(root / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return root


def load_datasets(cfg: ExperimentConfig):
    root = cfg.data_dir
    if not (root / "manifest.json").is_file():
        raise FileNotFoundError(f"no dataset manifest under {root}; run datagen first")
    clean = load_runs(root / "clean") if (root / "clean").is_dir() else []
    noisy = load_runs(root / "noisy") if (root / "noisy").is_dir() else []
    return clean, noisy


@dataclass
class Splits:
    train: list
    val: list
    finetune: list
    test: list
    norm_stats: object

    def runs(self, name):
        return getattr(self, name)


def make_splits(cfg: ExperimentConfig, clean, noisy) -> Splits:
    """Run-level splits; normalization is fit on the clean training runs only."""
    s = split_runs(clean, cfg.split, cfg.seed)
    n = split_runs(noisy, cfg.noisy_split, cfg.seed) if noisy else {"finetune": [], "test": []}
    stats = fit_normalization(s["train"])
    return Splits(s["train"], s["val"], n["finetune"], n["test"], stats)


def fine_tune_split(runs, seed):
    """Hold one run in five of the fine-tune portion out for early stopping."""
    if len(runs) < 2:
        return runs, runs
    k = max(1, round(0.2 * len(runs)))
    part = split_runs(runs, {"fit": 1.0 - k / len(runs), "val": k / len(runs)}, seed)
    return part["fit"], part["val"]


def datasets_for(cfg: ExperimentConfig, splits: Splits, model_config: ModelConfig = None):
    """Training (strided) and evaluation (non-overlapping) windows for every split."""
    mc = model_config or cfg.model
    T, contract = mc.window_length, mc.io_contract
    out = {"train": window_dataset(splits.train, T, cfg.train_stride, contract, stats=splits.norm_stats)}
    for name in ("val", "finetune", "test"):
        runs = splits.runs(name)
        if runs:
            out[name] = window_dataset(runs, T, T, contract, stats=splits.norm_stats)
    return out
