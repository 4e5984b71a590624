"""MotorRun container, closed-loop generation and the on-disk run format.

A run directory holds ``meta.json`` plus one raw little-endian float64
file ``<channel>.f64`` per channel.
"""

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import kernels
from ..errors import IntegrationDivergedError, InvalidInputError
from .control import FocGains, field_weakening_flux
from .params import MotorParams
from .scenarios import Scenario

SAMPLE_RATE = 250
INPUT_CHANNELS = ("u_d", "u_q", "omega_r")
TARGET_CHANNELS = ("i_d", "i_q", "tau_em")
CHANNELS = INPUT_CHANNELS + TARGET_CHANNELS
CHANNEL_UNITS = {"u_d": "V", "u_q": "V", "omega_r": "rad/s", "i_d": "A", "i_q": "A", "tau_em": "N*m"}


@dataclass
class MotorRun:
    """Six aligned channels sampled at 250 Hz.

    ``state_log`` (n x 5: i_sd, i_sq, phi_rd, phi_rq, omega_r) is kept in
    memory for simulated runs only; it is not written to disk.
    """

    channels: dict
    sample_rate: int = SAMPLE_RATE
    run_id: str = "run"
    meta: dict = field(default_factory=dict)
    state_log: np.ndarray = None

    def __post_init__(self):
        if self.sample_rate != SAMPLE_RATE:
            raise InvalidInputError(f"sample_rate must be {SAMPLE_RATE} Hz")
        if "omega_s" in self.channels:
            raise InvalidInputError("stator pulsation is not a recorded channel")
        lengths = {len(v) for v in self.channels.values()}
        if len(lengths) > 1:
            raise InvalidInputError(f"channel lengths differ: {lengths}")
        self.channels = {k: np.ascontiguousarray(v, dtype=np.float64) for k, v in self.channels.items()}

    def __len__(self):
        return len(next(iter(self.channels.values()))) if self.channels else 0

    def __getitem__(self, name):
        return self.channels[name]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.sample_rate

    def replace(self, channels=None, **changes) -> "MotorRun":
        kw = dict(channels=channels if channels is not None else dict(self.channels),
                  sample_rate=self.sample_rate, run_id=self.run_id, meta=dict(self.meta),
                  state_log=self.state_log)
        kw.update(changes)
        return MotorRun(**kw)

    def stacked(self, names) -> np.ndarray:
        return np.stack([self.channels[n] for n in names])


@dataclass(frozen=True)
class SimConfig:
    dt: float = 5e-5
    control_rate: int = 5000
    rated_flux: float = 0.9
    base_speed: float = 140.0

    @property
    def substeps(self) -> int:
        return int(round(1.0 / (self.control_rate * self.dt)))

    @property
    def decimation(self) -> int:
        return self.control_rate // SAMPLE_RATE


def generate_run(scenario: Scenario, params: MotorParams = None, gains: FocGains = None,
                 config: SimConfig = SimConfig(), run_id: str = None) -> MotorRun:
    """Simulate ``scenario`` under FOC and record all channels at 250 Hz."""
    params = params or MotorParams()
    gains = gains or FocGains.for_motor(params, rated_flux=config.rated_flux)
    if config.dt > 1e-4:
        raise InvalidInputError("internal integration step must be <= 1e-4 s")
    if config.control_rate % SAMPLE_RATE:
        raise InvalidInputError("control rate must be a multiple of the sample rate")
    n_samples = int(round(scenario.duration * SAMPLE_RATE))
    decim = config.decimation
    n_ctrl = (n_samples - 1) * decim + 1
    t_ctrl = np.arange(n_ctrl) / config.control_rate
    w_ref = np.ascontiguousarray(scenario.speed_at(t_ctrl), dtype=np.float64)
    flux_ref = np.ascontiguousarray(
        field_weakening_flux(w_ref, config.rated_flux, config.base_speed), dtype=np.float64)
    if scenario.flux_profile is not None:
        flux_ref = np.ascontiguousarray(np.minimum(flux_ref, scenario.flux_at(t_ctrl)))
    load = np.ascontiguousarray(scenario.load_at(t_ctrl), dtype=np.float64)
    out = np.zeros((n_samples, 9))
    failed = kernels.simulate_closed_loop(
        w_ref, flux_ref, load, params.packed(), float(params.mutual_inductance),
        gains.packed(1.0 / config.control_rate), float(config.dt), config.substeps, decim, out)
    if failed >= 0:
        t_fail = failed / config.control_rate
        raise IntegrationDivergedError(f"simulation diverged at t={t_fail:.6f} s", time=t_fail)
    channels = {
        "u_d": out[:, 5], "u_q": out[:, 6], "omega_r": out[:, 4],
        "i_d": out[:, 0], "i_q": out[:, 1], "tau_em": out[:, 7],
    }
    meta = {
        "scenario": scenario.to_dict(),
        "seed": scenario.seed,
        "motor_params": params.to_dict(),
        "sim": {"dt": config.dt, "control_rate": config.control_rate,
                "rated_flux": config.rated_flux, "base_speed": config.base_speed},
    }
    return MotorRun(channels, SAMPLE_RATE, run_id or scenario.name, meta,
                    state_log=np.ascontiguousarray(out[:, :5]))


def save_run(run: MotorRun, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "run_id": run.run_id,
        "sample_rate": run.sample_rate,
        "channels": list(run.channels),
        "units": {k: CHANNEL_UNITS.get(k, "") for k in run.channels},
        "length": len(run),
        "seed": run.meta.get("seed"),
        "scenario": run.meta.get("scenario"),
    }
    meta.update({k: v for k, v in run.meta.items() if k not in meta})
    for name, values in run.channels.items():
        values.astype("<f8").tofile(d / f"{name}.f64")
    with open(d / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return d


def load_run(directory) -> MotorRun:
    d = Path(directory)
    with open(d / "meta.json") as fh:
        meta = json.load(fh)
    channels = {}
    for name in meta["channels"]:
        arr = np.fromfile(d / f"{name}.f64", dtype="<f8")
        if len(arr) != meta["length"]:
            raise InvalidInputError(f"{d / name}.f64 has {len(arr)} samples, expected {meta['length']}")
        channels[name] = arr.astype(np.float64)
    extra = {k: v for k, v in meta.items() if k not in ("run_id", "sample_rate", "channels", "length", "units")}
    return MotorRun(channels, meta["sample_rate"], meta["run_id"], extra)


def load_runs(directory) -> list:
    """Load every run directory under ``directory`` in sorted name order."""
    root = Path(directory)
    return [load_run(p) for p in sorted(root.iterdir()) if (p / "meta.json").is_file()]
