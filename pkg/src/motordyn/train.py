"""Adam optimization loop, fine-tuning and the window-length benchmark sweep."""

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigError, InvalidInputError, ShapeError, TrainingDivergedError
from .models import ModelConfig, ModelKind, build_model, load_checkpoint
from .objectives import TV_WEIGHTINGS, get_loss, predict, report_from_predictions
from .pipeline import MIDDLE, window_dataset

log = logging.getLogger(__name__)

FINE_TUNE_LR = 1e-4
BENCHMARK_HEADER = ("kind", "window", "params", "mae", "smape", "r2")


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "tv_weighted_mse"
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    patience: int = 10
    tv_weighting: str = "sample"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0 or self.patience < 1:
            raise ConfigError("epochs must be >= 0 and patience >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ConfigError("Adam betas must lie in [0, 1) and eps must be positive")
        if self.tv_weighting not in TV_WEIGHTINGS:
            raise ConfigError(f"tv_weighting must be one of {TV_WEIGHTINGS}")
        try:
            get_loss(self.loss)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from None

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# optimizer ----------------------------------------------------------------------

def init_adam_state(params):
    return {"t": 0,
            "m": {k: np.zeros_like(v) for k, v in params.items()},
            "v": {k: np.zeros_like(v) for k, v in params.items()}}


def _adam_inplace(params, grads, state, cfg):
    state["t"] += 1
    t = state["t"]
    c1, c2 = 1.0 - cfg.beta1 ** t, 1.0 - cfg.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        m, v = state["m"][name], state["v"][name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


def adam_step(params, grads, state, config):
    """One bias-corrected Adam update; returns new ``(params, state)`` without mutating inputs."""
    if set(params) != set(grads):
        raise ShapeError("params and grads have different keys")
    state = init_adam_state(params) if state is None else state
    new_params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    new_state = {"t": state["t"],
                 "m": {k: np.array(v) for k, v in state["m"].items()},
                 "v": {k: np.array(v) for k, v in state["v"].items()}}
    _adam_inplace(new_params, {k: np.asarray(g, dtype=np.float64) for k, g in grads.items()},
                  new_state, config)
    return new_params, new_state


class Adam:
    """In-place Adam over a model's named parameters."""

    def __init__(self, model, config):
        self.config = config
        self.params = {name: p for name, p, _ in model.named_parameters()}
        self.grads = {name: g for name, _, g in model.named_parameters()}
        self.state = init_adam_state(self.params)

    def step(self):
        _adam_inplace(self.params, self.grads, self.state, self.config)


# history ------------------------------------------------------------------------

@dataclass
class TrainHistory:
    """One record per completed epoch.  ``wall_clock_s`` is the only non-deterministic field."""

    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def train_loss(self):
        return [r["train_loss"] for r in self.records]

    @property
    def val_loss(self):
        return [r["val_loss"] for r in self.records]

    @property
    def best_epoch(self):
        if not self.records:
            return None
        return min(self.records, key=lambda r: (r["val_loss"], r["epoch"]))["epoch"]

    def to_jsonl(self, path=None):
        text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_jsonl(cls, path):
        with open(path) as fh:
            return cls([json.loads(line) for line in fh if line.strip()])


# training -----------------------------------------------------------------------

def _batch_loss(config, pred, target, tv_source):
    fn = get_loss(config.loss)
    if config.loss == "mse":
        return fn(pred, target, return_grad=True)
    return fn(pred, target, tv_source=tv_source, return_grad=True, weighting=config.tv_weighting)


def _tv_source(dataset, idx=None):
    if dataset.contract != MIDDLE:
        return None
    return dataset.target_windows if idx is None else dataset.target_windows[idx]


def _check_contract(model, dataset, who):
    if dataset.contract != model.io_contract:
        raise InvalidInputError(
            f"{who}: dataset contract {dataset.contract!r} does not match model contract {model.io_contract!r}")
    if dataset.window != model.config.window_length:
        raise ShapeError(f"{who}: dataset window {dataset.window} != model window {model.config.window_length}")
    if len(dataset) == 0:
        raise InvalidInputError(f"{who}: empty dataset")


def validation_pass(model, dataset, loss_name, batch_size=256, weighting="sample"):
    """(loss, predictions) over a whole dataset in fixed batch order."""
    pred = predict(model, dataset.inputs, batch_size)
    fn = get_loss(loss_name)
    if loss_name == "mse":
        return fn(pred, dataset.targets), pred
    return fn(pred, dataset.targets, tv_source=_tv_source(dataset), weighting=weighting), pred


def _metrics(dataset, pred):
    if dataset.norm_stats is None:
        return None
    try:
        return report_from_predictions(dataset, pred, dataset.norm_stats).to_dict()
    except InvalidInputError:
        return None


def train(model, train_set, val_set, config: TrainConfig = TrainConfig(), log_path=None):
    """Mini-batch Adam with per-epoch seeded shuffling and early stopping.

    The parameters with the lowest validation loss seen at the end of any
    epoch are restored before returning.  With ``epochs == 0`` the model
    is returned untouched with an empty history.
    """
    _check_contract(model, train_set, "train")
    _check_contract(model, val_set, "validation")
    rng = np.random.default_rng(config.seed)
    opt = Adam(model, config)
    history = TrainHistory()
    best_loss, best_state, stale = math.inf, None, 0
    n = len(train_set)
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            pred = model.forward(train_set.inputs[idx])
            loss, grad = _batch_loss(config, pred, train_set.targets[idx], _tv_source(train_set, idx))
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch} batch {b}", epoch, b)
            model.zero_grad_all()
            model.backward(grad)
            opt.step()
            total += loss * len(idx)
        val_loss, val_pred = validation_pass(model, val_set, config.loss, weighting=config.tv_weighting)
        if not math.isfinite(val_loss):
            raise TrainingDivergedError(f"non-finite validation loss at epoch {epoch}", epoch, None)
        improved = val_loss < best_loss
        if improved:
            best_loss, best_state, stale = val_loss, model.snapshot(), 0
        else:
            stale += 1
        history.records.append({
            "epoch": epoch,
            "train_loss": total / n,
            "val_loss": val_loss,
            "val_metrics": _metrics(val_set, val_pred),
            "improved": improved,
            "wall_clock_s": time.perf_counter() - t0,
        })
        log.info("epoch %d train %.6g val %.6g%s", epoch, total / n, val_loss, " *" if improved else "")
        if stale >= config.patience:
            break
    if best_state is not None:
        model.load_state_dict(best_state)
    if log_path is not None:
        history.to_jsonl(log_path)
    return model, history


def fine_tune(checkpoint, fine_tune_set, val_set, config: TrainConfig = None, log_path=None):
    """Continue training a saved model on new (e.g. noisy) data; every parameter stays trainable.

    ``checkpoint`` is a path or an already built model (which is trained in place).
    """
    config = TrainConfig(learning_rate=FINE_TUNE_LR) if config is None else config
    if isinstance(checkpoint, (str, bytes)) or hasattr(checkpoint, "__fspath__"):
        model, _ = load_checkpoint(checkpoint)
    else:
        model = checkpoint
    channels = (model.config.in_channels, model.config.out_channels)
    if channels != (len(fine_tune_set.input_channels), len(fine_tune_set.target_channels)):
        raise InvalidInputError("checkpoint channel counts do not match the fine-tune dataset")
    return train(model, fine_tune_set, val_set, config, log_path)


# benchmark sweep ----------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkRow:
    kind: str
    window: int
    params: int
    mae: float
    smape: float
    r2: float

    def as_tuple(self):
        return (self.kind, self.window, self.params, self.mae, self.smape, self.r2)


def run_benchmark_suite(kinds, windows, train_runs, val_runs, norm_stats, config: TrainConfig = TrainConfig(),
                        train_stride=10, hidden_size=32, model_seed=0, histories=None):
    """Train and evaluate every (kind, window) pair; metrics are channel averages on ``val_runs``.

    Every cell uses the same model seed and the same training config.
    Validation windows are non-overlapping (stride equals the window).
    """
    rows = []
    cache = {}
    for window in windows:
        for kind in kinds:
            kind = ModelKind(kind)
            key = (window, kind.io_contract)
            if key not in cache:
                tr = window_dataset(train_runs, window, train_stride, kind.io_contract, stats=norm_stats)
                va = window_dataset(val_runs, window, window, kind.io_contract, stats=norm_stats)
                if len(tr) == 0 or len(va) == 0:
                    raise InvalidInputError(f"runs too short for window {window}")
                cache[key] = (tr, va)
            tr, va = cache[key]
            model = build_model(ModelConfig(kind, window_length=window, hidden_size=hidden_size, seed=model_seed))
            model, hist = train(model, tr, va, config)
            if histories is not None:
                histories[(kind.value, window)] = hist
            pred = predict(model, va.inputs)
            avg = report_from_predictions(va, pred, norm_stats).overall
            rows.append(BenchmarkRow(kind.value, window, model.count_parameters(),
                                     avg["mae"], avg["smape"], avg["r_squared"]))
            log.info("bench %s T=%d smape %.3f", kind.value, window, avg["smape"])
    return rows


def write_benchmark_csv(rows, path=None):
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCHMARK_HEADER)
    for r in rows:
        w.writerow([r.kind, r.window, r.params, repr(r.mae), repr(r.smape), repr(r.r2)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_benchmark_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != BENCHMARK_HEADER:
            raise InvalidInputError(f"unexpected benchmark header {reader.fieldnames}")
        return [BenchmarkRow(r["kind"], int(r["window"]), int(r["params"]), float(r["mae"]),
                             float(r["smape"]), float(r["r2"])) for r in reader]
