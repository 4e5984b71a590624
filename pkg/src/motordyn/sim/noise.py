"""Synthetic sensor corruption: additive Gaussian noise plus constant offsets."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError
from .run import CHANNELS, MotorRun


def _per_channel(value, name):
    if isinstance(value, dict):
        return {ch: float(value.get(ch, 0.0)) for ch in CHANNELS}
    try:
        v = float(value)
    except TypeError:
        raise InvalidInputError(f"{name} must be a number or a channel mapping") from None
    return {ch: v for ch in CHANNELS}


@dataclass(frozen=True)
class NoiseSpec:
    """Noise levels as fractions of each channel's (max - min) range."""

    gaussian_std: object = 0.0
    offset: object = 0.0
    seed: int = 0

    def stds(self):
        return _per_channel(self.gaussian_std, "gaussian_std")

    def offsets(self):
        return _per_channel(self.offset, "offset")

    def to_dict(self):
        return {"gaussian_std": self.stds(), "offset": self.offsets(), "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("gaussian_std", 0.0), d.get("offset", 0.0), int(d.get("seed", 0)))


DEFAULT_SENSOR_NOISE = NoiseSpec(
    gaussian_std=0.02,
    offset={"u_d": 0.02, "u_q": -0.015, "omega_r": 0.01, "i_d": 0.03, "i_q": -0.02, "tau_em": 0.025},
    seed=0,
)


def add_sensor_noise(run: MotorRun, spec: NoiseSpec) -> MotorRun:
    """Return a corrupted copy of ``run``; the input is left untouched."""
    stds, offsets = spec.stds(), spec.offsets()
    if any(s < 0 for s in stds.values()):
        raise InvalidInputError("gaussian_std must be >= 0")
    rng = np.random.default_rng(spec.seed)
    n = len(run)
    noisy = {}
    for ch in run.channels:
        x = run.channels[ch]
        span = float(x.max() - x.min()) if n else 0.0
        draw = rng.standard_normal(n)
        noisy[ch] = x + offsets.get(ch, 0.0) * span + (stds.get(ch, 0.0) * span) * draw
    meta = dict(run.meta)
    meta["noise"] = spec.to_dict()
    return run.replace(channels=noisy, meta=meta, state_log=None)
