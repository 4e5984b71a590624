import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from motordyn.errors import InvalidInputError
from motordyn.pipeline import (
    MIDDLE, SEQUENCE, NormStats, SplitSpec, WindowedDataset, denormalize, fit_normalization, normalize,
    normalize_array, split_runs, window_dataset, windows_per_run,
)
from motordyn.sim.run import INPUT_CHANNELS, TARGET_CHANNELS, MotorRun

CHANNELS = INPUT_CHANNELS + TARGET_CHANNELS


def make_run(n, rng, run_id="r", offset=0.0):
    return MotorRun({c: rng.normal(size=n) + offset for c in CHANNELS}, run_id=run_id)


def ramp_run(n, start, run_id):
    """Every channel counts sample indices from ``start`` so windows reveal their origin."""
    v = np.arange(start, start + n, dtype=float)
    return MotorRun({c: v.copy() for c in CHANNELS}, run_id=run_id)


# normalization

def test_fit_extremes():
    run = MotorRun({c: np.array([0.0, 5.0, 10.0]) for c in CHANNELS})
    stats = fit_normalization([run])
    assert stats.mins["i_d"] == 0.0 and stats.maxs["i_d"] == 10.0
    assert stats.source_runs == ["run"]


def test_two_runs_equal_concatenation(rng):
    a, b = make_run(50, rng, "a"), make_run(70, rng, "b", offset=3.0)
    joined = MotorRun({c: np.concatenate([a[c], b[c]]) for c in CHANNELS})
    s1, s2 = fit_normalization([a, b]), fit_normalization([joined])
    assert s1.mins == s2.mins and s1.maxs == s2.maxs


def test_constant_channel_rejected(rng):
    run = make_run(20, rng)
    run.channels["u_d"][:] = 1.0
    with pytest.raises(InvalidInputError):
        fit_normalization([run])
    with pytest.raises(InvalidInputError):
        fit_normalization([])


def test_normalize_example_and_endpoints():
    run = MotorRun({c: np.array([0.0, 5.0, 10.0]) for c in CHANNELS})
    stats = fit_normalization([run])
    out = normalize(run, stats)
    assert out["i_q"].tolist() == [-1.0, 0.0, 1.0]


def test_round_trip(rng):
    runs = [make_run(200, rng, str(i), offset=i * 50.0) for i in range(3)]
    stats = fit_normalization(runs)
    for run in runs:
        back = denormalize(normalize(run, stats), stats)
        for c in CHANNELS:
            assert np.allclose(back[c], run[c], rtol=1e-12, atol=1e-12 * np.abs(run[c]).max())


@given(st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=30).filter(lambda v: max(v) - min(v) > 1e-3))
def test_normalized_training_data_within_unit_interval(values):
    run = MotorRun({c: np.array(values) for c in CHANNELS})
    stats = fit_normalization([run])
    z = normalize(run, stats)
    for c in CHANNELS:
        assert z[c].min() >= -1.0 - 1e-12 and z[c].max() <= 1.0 + 1e-12


def test_channel_mismatch(rng):
    stats = NormStats({"i_d": 0.0}, {"i_d": 1.0})
    with pytest.raises(InvalidInputError):
        normalize(make_run(5, rng), stats)
    with pytest.raises(InvalidInputError):
        normalize_array(np.zeros((1, 3)), ["u_q"], stats)


def test_stats_dict_round_trip(rng):
    stats = fit_normalization([make_run(30, rng, "x")])
    assert NormStats.from_dict(json.loads(json.dumps(stats.to_dict()))) == stats


# windowing

def test_window_counts():
    assert len(window_dataset([ramp_run(100, 0, "a")], 100, 1)) == 1
    assert len(window_dataset([ramp_run(300, 0, "a")], 100, 100)) == 3


def test_short_runs_skipped(caplog):
    ds = window_dataset([ramp_run(50, 0, "short"), ramp_run(120, 0, "ok")], 100, 10)
    assert ds.skipped_runs == 1
    assert len(ds) == 3
    assert "skipped 1 run" in caplog.text


@given(lengths=st.lists(st.integers(1, 400), min_size=1, max_size=5), window=st.integers(1, 120),
       stride=st.integers(1, 60))
def test_windows_never_span_runs(lengths, window, stride):
    runs, start = [], 0
    for i, n in enumerate(lengths):
        runs.append(ramp_run(n, start, f"r{i}"))
        start += n + 10_000
    ds = window_dataset(runs, window, stride)
    assert len(ds) == sum(windows_per_run(n, window, stride) for n in lengths)
    if len(ds):
        steps = np.diff(ds.inputs, axis=2)
        assert np.all(steps == 1.0)
        assert np.array_equal(ds.targets, ds.inputs)


def test_sequence_and_middle_contracts():
    run = ramp_run(250, 0, "a")
    seq = window_dataset([run], 100, 50, SEQUENCE)
    mid = window_dataset([run], 100, 50, MIDDLE)
    assert seq.inputs.shape == (4, 3, 100) and seq.targets.shape == (4, 3, 100)
    assert mid.targets.shape == (4, 3, 1)
    assert mid.targets[:, 0, 0].tolist() == [50.0, 100.0, 150.0, 200.0]
    assert np.array_equal(mid.target_windows, seq.targets)


def test_channels_and_stator_pulsation_excluded(rng):
    ds = window_dataset([make_run(120, rng)], 100, 10)
    assert ds.input_channels == ("u_d", "u_q", "omega_r")
    assert ds.target_channels == ("i_d", "i_q", "tau_em")
    with pytest.raises(InvalidInputError):
        window_dataset([make_run(120, rng)], 100, 10, input_channels=("u_d", "u_q", "omega_s"))
    with pytest.raises(InvalidInputError):
        MotorRun({"omega_s": np.zeros(3)})


def test_invalid_window_arguments(rng):
    with pytest.raises(InvalidInputError):
        window_dataset([make_run(10, rng)], 0, 1)
    with pytest.raises(InvalidInputError):
        window_dataset([make_run(10, rng)], 5, 1, contract="last")


def test_normalized_windows_and_manifest_round_trip(rng, tmp_path):
    runs = [make_run(260, rng, f"r{i}") for i in range(3)]
    stats = fit_normalization(runs[:2])
    ds = window_dataset(runs, 100, 40, SEQUENCE, stats=stats)
    ds.save_manifest(tmp_path / "m.json")
    manifest = json.loads((tmp_path / "m.json").read_text())
    again = WindowedDataset.from_manifest(manifest, list(reversed(runs)))
    assert np.array_equal(again.inputs, ds.inputs) and np.array_equal(again.targets, ds.targets)
    assert again.run_ids == ds.run_ids
    with pytest.raises(InvalidInputError):
        WindowedDataset.from_manifest(manifest, runs[:1])


def test_stitch_rebuilds_runs():
    runs = [ramp_run(300, 0, "a"), ramp_run(200, 1000, "b")]
    ds = window_dataset(runs, 100, 100)
    order = np.random.default_rng(0).permutation(len(ds))
    stitched = ds.subset(order).stitch(ds.targets[order])
    assert stitched["i_d"][0].tolist() == list(range(300))
    assert stitched["i_d"][1].tolist() == list(range(1000, 1200))


# splits

def test_split_fractions(rng):
    runs = [make_run(5, rng, f"r{i}") for i in range(10)]
    s = split_runs(runs, {"train": 0.7, "val": 0.3}, seed=3)
    assert len(s["train"]) == 7 and len(s["val"]) == 3
    s = split_runs(runs, {"finetune": 0.2, "test": 0.8}, seed=3)
    assert len(s["finetune"]) == 2 and len(s["test"]) == 8


@given(n=st.integers(2, 40), seed=st.integers(0, 2**31))
def test_split_partitions_by_run(n, seed):
    runs = [MotorRun({"i_d": np.zeros(1)}, run_id=f"r{i}") for i in range(n)]
    s = split_runs(runs, {"train": 0.7, "val": 0.3}, seed=seed)
    ids = [r.run_id for part in s.values() for r in part]
    assert sorted(ids) == sorted(r.run_id for r in runs)
    again = split_runs(runs, SplitSpec({"train": 0.7, "val": 0.3}), seed=seed)
    assert [r.run_id for r in again["train"]] == [r.run_id for r in s["train"]]


def test_split_spec_validation(rng):
    with pytest.raises(InvalidInputError):
        SplitSpec({"a": 0.5, "b": 0.6})
    with pytest.raises(InvalidInputError):
        SplitSpec({"a": -0.2, "b": 1.2})
    with pytest.raises(InvalidInputError):
        split_runs([make_run(3, rng)], {"a": 0.5, "b": 0.5})
