"""Training losses, evaluation metrics and the SMAPE-vs-signal-complexity analysis."""

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidInputError, ShapeError


def _pair(y, y_hat):
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ShapeError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    return y, y_hat


# losses -----------------------------------------------------------------------

def mse_loss(pred, target, return_grad=False):
    pred, target = _pair(pred, target)
    diff = pred - target
    value = float(np.mean(diff * diff))
    if return_grad:
        return value, 2.0 * diff / diff.size
    return value


def _as_batch(a):
    """(T,) -> (1, 1, T); (N, T) -> (N, 1, T); (N, C, T) unchanged."""
    if a.ndim == 1:
        return a[None, None, :]
    if a.ndim == 2:
        return a[:, None, :]
    if a.ndim == 3:
        return a
    raise ShapeError(f"expected 1-3 dims, got shape {a.shape}")


def total_variation(y):
    """Sum of absolute first differences along the last axis."""
    y = np.asarray(y, dtype=np.float64)
    return np.abs(np.diff(y, axis=-1)).sum(axis=-1)


TV_WEIGHTINGS = ("sample", "channel")


def tv_weighted_mse_loss(pred, target, tv_source=None, return_grad=False, weighting="sample"):
    """TV-weighted squared error, averaged over samples and channels.

    ``pred``/``target`` are (N, C, T) (lower ranks are promoted).  Each
    channel's time-mean squared error is scaled by a total-variation weight
    taken from the ground truth: with ``weighting="sample"`` one weight per
    window, the L1 variation of the whole multichannel window; with
    ``"channel"`` each channel's own variation.  The two agree for a single
    channel.  ``tv_source`` replaces ``target`` as the weight source (the
    full target window of a middle-value model).  Weights are constants
    with respect to ``pred``: the gradient only flows through the error.
    """
    if weighting not in TV_WEIGHTINGS:
        raise InvalidInputError(f"weighting must be one of {TV_WEIGHTINGS}, got {weighting!r}")
    pred, target = _pair(pred, target)
    shape = pred.shape
    p, y = _as_batch(pred), _as_batch(target)
    src = y if tv_source is None else _as_batch(np.asarray(tv_source, dtype=np.float64))
    if src.shape[-1] < 2:
        raise InvalidInputError("TV weight needs at least 2 time steps")
    if src.shape[:2] != y.shape[:2]:
        raise ShapeError("tv_source must match target in samples and channels")
    tv = total_variation(src)                      # (N, C)
    if weighting == "sample":
        tv = np.repeat(tv.sum(axis=1, keepdims=True), tv.shape[1], axis=1)
    diff = p - y
    per = np.mean(diff * diff, axis=-1)            # (N, C)
    value = float(np.mean(tv * per))
    if not return_grad:
        return value
    n, c, t = diff.shape
    grad = tv[:, :, None] * (2.0 / t) * diff / (n * c)
    return value, grad.reshape(shape)


LOSSES = {"mse": mse_loss, "tv_weighted_mse": tv_weighted_mse_loss, "tv": tv_weighted_mse_loss}


def get_loss(name):
    try:
        return LOSSES[name]
    except KeyError:
        raise InvalidInputError(f"unknown loss {name!r}; choose from {sorted(LOSSES)}") from None


# metrics ----------------------------------------------------------------------

def mae(y, y_hat):
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


def smape(y, y_hat):
    """Percent in [0, 100]; terms where both values are 0 contribute 0."""
    y, y_hat = _pair(y, y_hat)
    num = np.abs(y_hat - y)
    den = np.abs(y_hat) + np.abs(y)
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(100.0 * np.mean(terms))


def r_squared(y, y_hat):
    """``1 - SS_res / SS_tot``; undefined (error) for a constant ground truth."""
    y, y_hat = _pair(y, y_hat)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise InvalidInputError("R^2 undefined for a constant ground-truth series")
    return 1.0 - float(np.sum((y - y_hat) ** 2)) / ss_tot


def signal_complexity(window):
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 1 or w.size < 2:
        raise InvalidInputError("signal complexity needs a 1-D window of length >= 2")
    return float(np.abs(np.diff(w)).sum())


def window_sc_smape(y, y_hat, window, stride):
    """(SC of each ground-truth window, SMAPE of each window) for sliding windows."""
    y, y_hat = _pair(y, y_hat)
    if y.ndim != 1:
        raise ShapeError("expected 1-D series")
    if window < 2:
        raise InvalidInputError("window must be >= 2")
    if y.size < window:
        raise InvalidInputError(f"series of length {y.size} shorter than window {window}")
    starts = np.arange(0, y.size - window + 1, stride)
    idx = starts[:, None] + np.arange(window)[None, :]
    yw, pw = y[idx], y_hat[idx]
    sc = np.abs(np.diff(yw, axis=1)).sum(axis=1)
    num = np.abs(pw - yw)
    den = np.abs(pw) + np.abs(yw)
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return sc, 100.0 * terms.mean(axis=1)


@dataclass
class SCHistogram:
    sc_bin_edges: np.ndarray
    smape_bin_edges: np.ndarray
    counts: np.ndarray  # (n_sc_bins, n_smape_bins)

    @property
    def total(self):
        return int(self.counts.sum())

    def to_dict(self):
        return {
            "sc_bin_edges": self.sc_bin_edges.tolist(),
            "smape_bin_edges_percent": self.smape_bin_edges.tolist(),
            "counts": self.counts.astype(int).tolist(),
        }

    def csv_rows(self):
        rows = []
        for i in range(len(self.sc_bin_edges) - 1):
            for j in range(len(self.smape_bin_edges) - 1):
                rows.append((self.sc_bin_edges[i], self.sc_bin_edges[i + 1],
                             self.smape_bin_edges[j], self.smape_bin_edges[j + 1],
                             int(self.counts[i, j])))
        return rows

    def to_csv(self, path=None, channel=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["sc_lo", "sc_hi", "smape_lo", "smape_hi", "count"]
        w.writerow((["channel"] if channel else []) + head)
        for r in self.csv_rows():
            w.writerow(([channel] if channel else []) + [repr(float(v)) for v in r[:4]] + [r[4]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def smape_sc_histogram(y, y_hat, window=100, stride=50, sc_bins=30, smape_bins=30, sc_range=None):
    """2-D histogram of window SC (log-spaced bins) against window SMAPE (linear, 0-100 %).

    ``y``/``y_hat`` may be single series or equal-length lists of series
    (e.g. one per run); windows never cross series boundaries.
    """
    if isinstance(y, (list, tuple)):
        if len(y) != len(y_hat):
            raise ShapeError("series lists differ in length")
        parts = [window_sc_smape(a, b, window, stride) for a, b in zip(y, y_hat)]
        sc = np.concatenate([p[0] for p in parts])
        sm = np.concatenate([p[1] for p in parts])
    else:
        sc, sm = window_sc_smape(y, y_hat, window, stride)
    if sc_range is None:
        positive = sc[sc > 0]
        lo = float(positive.min()) if positive.size else 1e-12
        hi = float(sc.max()) if sc.size else 1.0
    else:
        lo, hi = (float(v) for v in sc_range)
    if not hi > lo:
        hi = lo * 10.0
    sc_edges = np.geomspace(lo, hi, sc_bins + 1)
    sm_edges = np.linspace(0.0, 100.0, smape_bins + 1)
    counts, _, _ = np.histogram2d(np.clip(sc, lo, hi), np.clip(sm, 0.0, 100.0),
                                  bins=[sc_edges, sm_edges])
    return SCHistogram(sc_edges, sm_edges, counts.astype(np.int64))


def top_quartile_smape(y, y_hat, window=100, stride=50):
    """Mean window SMAPE over windows whose SC is in the top quartile."""
    if isinstance(y, (list, tuple)):
        parts = [window_sc_smape(a, b, window, stride) for a, b in zip(y, y_hat)]
        sc = np.concatenate([p[0] for p in parts])
        sm = np.concatenate([p[1] for p in parts])
    else:
        sc, sm = window_sc_smape(y, y_hat, window, stride)
    cut = np.quantile(sc, 0.75)
    return float(sm[sc >= cut].mean())


# reports ----------------------------------------------------------------------

@dataclass
class MetricsReport:
    """Per-channel MAE (channel units), SMAPE (%) and R^2, plus channel averages."""

    channels: dict
    units: dict = field(default_factory=dict)
    window_length: int = 0
    n_samples: int = 0
    n_windows: int = 0

    @property
    def overall(self):
        keys = ("mae", "smape", "r_squared")
        return {k: float(np.mean([m[k] for m in self.channels.values()])) for k in keys}

    def to_dict(self):
        chans = {}
        for name, m in self.channels.items():
            unit = self.units.get(name, "")
            chans[name] = {f"mae_{unit}" if unit else "mae": m["mae"],
                           "smape_percent": m["smape"], "r_squared": m["r_squared"]}
        ov = self.overall
        return {
            "channels": chans,
            "average": {"mae": ov["mae"], "smape_percent": ov["smape"], "r_squared": ov["r_squared"]},
            "window_length": self.window_length,
            "n_samples": self.n_samples,
            "n_windows": self.n_windows,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def channel_metrics(y, y_hat):
    return {"mae": mae(y, y_hat), "smape": smape(y, y_hat), "r_squared": r_squared(y, y_hat)}


def evaluate_rescaled(model, dataset, norm_stats, batch_size=256, return_series=False):
    """Metrics on the original channel ranges.

    Predictions and targets are denormalized with ``norm_stats`` and pooled
    over every window before computing MAE/SMAPE/R^2 per target channel.
    With ``return_series`` the stitched per-run ground truth and prediction
    (physical units) are returned too, keyed by channel.
    """
    pred = predict(model, dataset.inputs, batch_size)
    return report_from_predictions(dataset, pred, norm_stats, return_series)


def report_from_predictions(dataset, pred, norm_stats, return_series=False):
    from .pipeline import denormalize_array
    from .sim.run import CHANNEL_UNITS

    names = list(dataset.target_channels)
    missing = [n for n in names if n not in norm_stats.mins]
    if missing:
        raise InvalidInputError(f"normalization stats lack channels {missing}")
    if pred.shape != dataset.targets.shape:
        raise ShapeError(f"model output {pred.shape} does not match targets {dataset.targets.shape}")
    y = denormalize_array(dataset.targets, names, norm_stats, axis=1)
    y_hat = denormalize_array(pred, names, norm_stats, axis=1)
    chans = {}
    for c, name in enumerate(names):
        chans[name] = channel_metrics(y[:, c, :].ravel(), y_hat[:, c, :].ravel())
    report = MetricsReport(chans, {n: CHANNEL_UNITS.get(n, "") for n in names},
                           dataset.window, int(y[:, 0, :].size), len(dataset))
    if not return_series:
        return report
    return report, dataset.stitch(y), dataset.stitch(y_hat)


def predict(model, inputs, batch_size=256):
    outs = [model.forward(inputs[i:i + batch_size]) for i in range(0, len(inputs), batch_size)]
    if not outs:
        raise InvalidInputError("empty dataset")
    return np.concatenate(outs, axis=0)
