"""Normalization, windowing and run-level splits.

Inputs are always (u_d, u_q, omega_r) and targets (i_d, i_q, tau_em);
the stator pulsation is never part of a dataset.
"""

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ShapeError
from .sim.run import INPUT_CHANNELS, TARGET_CHANNELS, MotorRun

log = logging.getLogger(__name__)

SEQUENCE = "sequence"
MIDDLE = "pointwise"


@dataclass
class NormStats:
    """Per-channel min/max observed on the training runs listed in ``source_runs``."""

    mins: dict
    maxs: dict
    source_runs: list = field(default_factory=list)

    def span(self, ch):
        return self.maxs[ch] - self.mins[ch]

    def to_dict(self):
        return {"mins": dict(self.mins), "maxs": dict(self.maxs), "source_runs": list(self.source_runs)}

    @classmethod
    def from_dict(cls, d):
        return cls({k: float(v) for k, v in d["mins"].items()},
                   {k: float(v) for k, v in d["maxs"].items()},
                   list(d.get("source_runs", [])))


def fit_normalization(runs) -> NormStats:
    runs = list(runs)
    if not runs:
        raise InvalidInputError("need at least one run to fit normalization")
    mins, maxs = {}, {}
    for ch in runs[0].channels:
        mins[ch] = float(min(r.channels[ch].min() for r in runs))
        maxs[ch] = float(max(r.channels[ch].max() for r in runs))
        if not maxs[ch] > mins[ch]:
            raise InvalidInputError(f"channel {ch!r} is constant over the training runs")
    return NormStats(mins, maxs, [r.run_id for r in runs])


def _check_channels(names, stats):
    missing = [n for n in names if n not in stats.mins]
    if missing:
        raise InvalidInputError(f"normalization stats have no entry for {missing}")


def normalize_array(values, names, stats, axis=0):
    """Map each channel along ``axis`` to ``2 (x - min) / (max - min) - 1``."""
    _check_channels(names, stats)
    values = np.asarray(values, dtype=np.float64)
    shape = [1] * values.ndim
    shape[axis] = len(names)
    lo = np.array([stats.mins[n] for n in names]).reshape(shape)
    span = np.array([stats.span(n) for n in names]).reshape(shape)
    return 2.0 * (values - lo) / span - 1.0


def denormalize_array(values, names, stats, axis=0):
    _check_channels(names, stats)
    values = np.asarray(values, dtype=np.float64)
    shape = [1] * values.ndim
    shape[axis] = len(names)
    lo = np.array([stats.mins[n] for n in names]).reshape(shape)
    span = np.array([stats.span(n) for n in names]).reshape(shape)
    return (values + 1.0) * span / 2.0 + lo


def normalize(run: MotorRun, stats: NormStats) -> MotorRun:
    names = list(run.channels)
    _check_channels(names, stats)
    return run.replace(channels={n: normalize_array(run[n], [n], stats) for n in names}, state_log=None)


def denormalize(run: MotorRun, stats: NormStats) -> MotorRun:
    names = list(run.channels)
    _check_channels(names, stats)
    return run.replace(channels={n: denormalize_array(run[n], [n], stats) for n in names}, state_log=None)


def windows_per_run(length, window, stride):
    return 0 if length < window else (length - window) // stride + 1


@dataclass
class WindowedDataset:
    """Aligned input/target windows cut from whole runs.

    ``targets`` is (N, 3, T) for the sequence contract and (N, 3, 1) for the
    pointwise (middle-value) contract; ``target_windows`` always holds the full (N, 3, T)
    target windows (used for TV loss weights).
    """

    inputs: np.ndarray
    targets: np.ndarray
    target_windows: np.ndarray
    run_ids: list
    run_index: np.ndarray
    starts: np.ndarray
    window: int
    stride: int
    contract: str
    norm_stats: NormStats = None
    skipped_runs: int = 0
    input_channels: tuple = INPUT_CHANNELS
    target_channels: tuple = TARGET_CHANNELS

    def __len__(self):
        return len(self.inputs)

    def subset(self, idx):
        idx = np.asarray(idx)
        return WindowedDataset(self.inputs[idx], self.targets[idx], self.target_windows[idx],
                               self.run_ids, self.run_index[idx], self.starts[idx], self.window,
                               self.stride, self.contract, self.norm_stats, self.skipped_runs,
                               self.input_channels, self.target_channels)

    def stitch(self, arr):
        """Concatenate per-window arrays (N, C, L) into per-run series per channel.

        Returns ``{channel: [series_run0, series_run1, ...]}``.  Series are
        contiguous signals only when ``stride == window`` (sequence contract).
        """
        out = {name: [] for name in self.target_channels}
        for r in range(len(self.run_ids)):
            sel = np.flatnonzero(self.run_index == r)
            if sel.size == 0:
                continue
            sel = sel[np.argsort(self.starts[sel], kind="stable")]
            for c, name in enumerate(self.target_channels):
                out[name].append(arr[sel, c, :].reshape(-1))
        return out

    def manifest(self):
        return {
            "run_ids": list(self.run_ids),
            "window": self.window,
            "stride": self.stride,
            "contract": self.contract,
            "n_windows": len(self),
            "skipped_runs": self.skipped_runs,
            "input_channels": list(self.input_channels),
            "target_channels": list(self.target_channels),
            "norm_stats": self.norm_stats.to_dict() if self.norm_stats else None,
        }

    def save_manifest(self, path):
        with open(path, "w") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_manifest(cls, manifest, runs):
        """Rebuild the windows from ``runs`` (looked up by ``run_id``)."""
        by_id = {r.run_id: r for r in runs}
        try:
            selected = [by_id[i] for i in manifest["run_ids"]]
        except KeyError as exc:
            raise InvalidInputError(f"run {exc.args[0]!r} from manifest not available") from None
        stats = NormStats.from_dict(manifest["norm_stats"]) if manifest.get("norm_stats") else None
        return window_dataset(selected, manifest["window"], manifest["stride"], manifest["contract"],
                              stats=stats, input_channels=tuple(manifest["input_channels"]),
                              target_channels=tuple(manifest["target_channels"]))


def window_dataset(runs, window, stride, contract=SEQUENCE, stats=None,
                   input_channels=INPUT_CHANNELS, target_channels=TARGET_CHANNELS) -> WindowedDataset:
    """Slide a window over each run separately (never across run boundaries).

    When ``stats`` is given the runs are normalized first.  Runs shorter than
    ``window`` are skipped and counted in ``skipped_runs``.
    """
    if contract not in (SEQUENCE, MIDDLE):
        raise InvalidInputError(f"contract must be {SEQUENCE!r} or {MIDDLE!r}")
    if window < 1 or stride < 1:
        raise InvalidInputError("window and stride must be positive")
    if "omega_s" in input_channels or "omega_s" in target_channels:
        raise InvalidInputError("stator pulsation is excluded from datasets")
    runs = list(runs)
    xs, ys, rix, starts = [], [], [], []
    skipped = 0
    for r_i, run in enumerate(runs):
        n_win = windows_per_run(len(run), window, stride)
        if n_win == 0:
            skipped += 1
            continue
        x = run.stacked(input_channels)
        y = run.stacked(target_channels)
        if stats is not None:
            x = normalize_array(x, input_channels, stats)
            y = normalize_array(y, target_channels, stats)
        s = np.arange(n_win) * stride
        idx = s[:, None] + np.arange(window)[None, :]
        xs.append(x[:, idx].transpose(1, 0, 2))
        ys.append(y[:, idx].transpose(1, 0, 2))
        rix.append(np.full(n_win, r_i))
        starts.append(s)
    if skipped:
        log.warning("skipped %d run(s) shorter than the window (%d samples)", skipped, window)
    n_in, n_out = len(input_channels), len(target_channels)
    X = np.ascontiguousarray(np.concatenate(xs)) if xs else np.empty((0, n_in, window))
    Yw = np.ascontiguousarray(np.concatenate(ys)) if ys else np.empty((0, n_out, window))
    if contract == MIDDLE:
        mid = window // 2
        Y = np.ascontiguousarray(Yw[:, :, mid:mid + 1])
    else:
        Y = Yw
    return WindowedDataset(
        X, Y, Yw, [r.run_id for r in runs],
        np.concatenate(rix) if rix else np.empty(0, dtype=int),
        np.concatenate(starts) if starts else np.empty(0, dtype=int),
        window, stride, contract, stats, skipped, tuple(input_channels), tuple(target_channels),
    )


@dataclass(frozen=True)
class SplitSpec:
    """Named split fractions (e.g. ``{"train": 0.7, "val": 0.3}``); splits are by run."""

    fractions: tuple

    def __init__(self, fractions):
        items = tuple(fractions.items()) if isinstance(fractions, dict) else tuple(fractions)
        if not items or any(f < 0 for _, f in items):
            raise InvalidInputError("split fractions must be non-negative")
        if abs(sum(f for _, f in items) - 1.0) > 1e-9:
            raise InvalidInputError("split fractions must sum to 1")
        object.__setattr__(self, "fractions", items)

    def to_dict(self):
        return dict(self.fractions)


def split_runs(runs, spec, seed=0):
    """Shuffle runs with ``seed`` and partition them by the requested fractions."""
    if not isinstance(spec, SplitSpec):
        spec = SplitSpec(spec)
    runs = list(runs)
    n = len(runs)
    k = len(spec.fractions)
    if n < k:
        raise InvalidInputError(f"{n} runs cannot fill {k} splits")
    order = np.random.default_rng(seed).permutation(n)
    counts = [int(round(f * n)) for _, f in spec.fractions[:-1]]
    counts = [max(c, 1) for c in counts]
    counts.append(n - sum(counts))
    if counts[-1] < 1:
        raise InvalidInputError(f"split fractions leave no runs for {spec.fractions[-1][0]!r}")
    out, pos = {}, 0
    for (name, _), c in zip(spec.fractions, counts):
        out[name] = [runs[i] for i in order[pos:pos + c]]
        pos += c
    return out
