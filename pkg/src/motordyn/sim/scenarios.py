"""Operating scenarios: speed reference and load torque versus time."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError


@dataclass(frozen=True)
class Scenario:
    """A speed/load program for one simulated run.

    ``speed_profile`` holds ``(t, rad/s)`` breakpoints, linearly
    interpolated and held after the last point.  ``load_profile`` holds
    ``(t, N*m)`` steps; each value applies from its time until the next step.
    ``flux_profile`` optionally holds ``(t, Wb)`` breakpoints (interpolated
    like the speed) for a reduced flux program; the controller always
    uses the smaller of this and the field-weakening limit.
    """

    duration: float
    speed_profile: tuple
    load_profile: tuple = ((0.0, 0.0),)
    seed: int = 0
    name: str = "custom"
    flux_profile: tuple = None

    def __post_init__(self):
        if not self.duration > 0:
            raise InvalidInputError("scenario duration must be > 0")
        profiles = [("speed", self.speed_profile), ("load", self.load_profile)]
        if self.flux_profile is not None:
            profiles.append(("flux", self.flux_profile))
            if any(float(v) <= 0 for _, v in self.flux_profile):
                raise InvalidInputError("flux profile values must be positive")
        for label, prof in profiles:
            if len(prof) == 0:
                raise InvalidInputError(f"{label} profile is empty")
            times = [float(t) for t, _ in prof]
            if times[0] != 0.0:
                raise InvalidInputError(f"{label} profile must start at t=0")
            if any(b < a for a, b in zip(times, times[1:])):
                raise InvalidInputError(f"{label} profile times must be non-decreasing")
            if times[-1] > self.duration:
                raise InvalidInputError(f"{label} profile extends past the duration")
        object.__setattr__(self, "speed_profile", tuple((float(t), float(v)) for t, v in self.speed_profile))
        object.__setattr__(self, "load_profile", tuple((float(t), float(v)) for t, v in self.load_profile))
        if self.flux_profile is not None:
            object.__setattr__(self, "flux_profile",
                               tuple((float(t), float(v)) for t, v in self.flux_profile))

    def speed_at(self, t):
        ts, vs = zip(*self.speed_profile)
        return np.interp(t, ts, vs)

    def flux_at(self, t):
        """Programmed flux reference, or None when the scenario has no flux program."""
        if self.flux_profile is None:
            return None
        ts, vs = zip(*self.flux_profile)
        return np.interp(t, ts, vs)

    def load_at(self, t):
        ts, vs = zip(*self.load_profile)
        idx = np.searchsorted(np.asarray(ts), np.asarray(t, dtype=float), side="right") - 1
        return np.asarray(vs)[np.clip(idx, 0, len(vs) - 1)]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "duration": self.duration,
            "seed": self.seed,
            "speed_profile": [list(p) for p in self.speed_profile],
            "load_profile": [list(p) for p in self.load_profile],
            "flux_profile": None if self.flux_profile is None else [list(p) for p in self.flux_profile],
        }

    @classmethod
    def from_dict(cls, d) -> "Scenario":
        return cls(
            duration=float(d["duration"]),
            speed_profile=tuple(tuple(p) for p in d["speed_profile"]),
            load_profile=tuple(tuple(p) for p in d.get("load_profile", [[0.0, 0.0]])),
            seed=int(d.get("seed", 0)),
            name=d.get("name", "custom"),
            flux_profile=None if d.get("flux_profile") is None else tuple(tuple(p) for p in d["flux_profile"]),
        )


def _ramp_hold(points, duration):
    """``[(t, v), ...]`` -> breakpoints clipped to ``duration``."""
    out = [(0.0, 0.0)] if points[0][0] > 0 else []
    out += [(t, v) for t, v in points if t <= duration]
    return tuple(out)


def _periodic_loads(values, period, duration):
    return tuple((i * period, v) for i, v in enumerate(values) if i * period <= duration)


def default_scenario(duration: float = 5.0) -> Scenario:
    """Constant 100 rad/s reference from standstill, no load."""
    return Scenario(duration, ((0.0, 100.0),), ((0.0, 0.0),), seed=0, name="speed_step")


def _library(duration):
    d = duration
    tri = [(0.0, 0.0)]
    t, sign = 2.5, 1.0
    while t <= d:
        tri.append((t, 150.0 * sign))
        t += 5.0
        sign = -sign
    stairs = [(0.0, 0.0)]
    for i, v in enumerate([40, 80, 120, 160, 200, 160, 120, 80, 40, 0]):
        t0 = 0.5 + 4.0 * i
        if t0 + 0.3 > d:
            break
        stairs += [(t0, stairs[-1][1]), (t0 + 0.3, float(v))]
    lib = {
        "speed_step": ((0.0, 100.0),),
        "nominal_ramp": ((0.0, 0.0), (2.0, 140.0)),
        "reversal": ((0.0, 0.0), (2.0, 120.0), (10.0, 120.0), (14.0, -120.0),
                     (24.0, -120.0), (28.0, 120.0)),
        "load_steps": ((0.0, 0.0), (1.0, 100.0)),
        "field_weakening": ((0.0, 0.0), (8.0, 220.0), (16.0, 220.0), (20.0, 60.0),
                            (26.0, 60.0), (32.0, 200.0)),
        "stop_start": ((0.0, 0.0), (1.5, 100.0), (8.0, 100.0), (9.5, 0.0), (14.0, 0.0),
                       (16.0, 150.0), (24.0, 150.0), (26.0, 0.0), (30.0, 0.0), (31.0, -80.0)),
        "triangle": tuple(tri),
        "staircase": tuple(stairs),
        "slow_reversal": ((0.0, 0.0), (3.0, 150.0), (5.0, 150.0), (35.0, -150.0)),
        "overload_pulses": ((0.0, 0.0), (1.0, 80.0)),
        "low_speed_load": ((0.0, 0.0), (1.0, 20.0), (20.0, 20.0), (22.0, -20.0)),
        "flux_program": ((0.0, 0.0), (2.0, 110.0), (18.0, 110.0), (21.0, -110.0)),
    }
    loads = {
        "speed_step": ((0.0, 0.0),),
        "nominal_ramp": ((0.0, 0.0), (10.0, 10.0), (20.0, 20.0), (30.0, 0.0)),
        "reversal": ((0.0, 5.0),),
        "load_steps": _periodic_loads([0, 15, -10, 20, 5, -15, 10, 0, 18, -5], 4.0, d),
        "field_weakening": ((0.0, 0.0), (12.0, 8.0), (22.0, 15.0), (34.0, 5.0)),
        "stop_start": ((0.0, 0.0), (5.0, 10.0), (18.0, -8.0), (28.0, 0.0)),
        "triangle": ((0.0, 3.0),),
        "staircase": _periodic_loads([0, 5, 10, 5, 0, -5, -10, -5, 0, 5], 4.0, d),
        "slow_reversal": ((0.0, 5.0),),
        "overload_pulses": tuple(
            p for i in range(int(d // 4.0) + 1)
            for p in ((4.0 * i, 0.0), (4.0 * i + 2.0, 25.0), (4.0 * i + 2.5, 0.0))
            if p[0] <= d
        ),
        "low_speed_load": _periodic_loads([0, 15, -15, 10, -10, 0, 12, -12, 0, 5], 4.0, d),
        "flux_program": _periodic_loads([0, 4, 12, 4, 0, -6, -14, -4, 0, 8], 4.0, d),
    }
    # light-load flux reduction: lower flux while the load is small, rated flux under load
    fluxes = {"flux_program": ((0.0, 0.9), (3.0, 0.9), (3.5, 0.5), (7.5, 0.5), (8.0, 0.7), (12.0, 0.7),
                               (12.5, 0.9), (16.0, 0.9), (16.5, 0.5), (23.5, 0.5), (24.0, 0.9),
                               (32.0, 0.9), (32.5, 0.6), (40.0, 0.6))}
    out = {}
    for k in lib:
        speed = tuple((t, v) for t, v in lib[k] if t <= d) or ((0.0, 0.0),)
        flux = fluxes.get(k)
        if flux is not None:
            flux = tuple((t, v) for t, v in flux if t <= d)
        out[k] = (speed, loads[k], flux)
    return out


SCENARIO_NAMES = tuple(_library(40.0))


def named_scenario(name: str, duration: float = 40.0, seed: int = 0) -> Scenario:
    lib = _library(duration)
    if name not in lib:
        raise InvalidInputError(f"unknown scenario {name!r}; choose from {sorted(lib)}")
    speed, load, flux = lib[name]
    return Scenario(duration, speed, load, seed=seed, name=name, flux_profile=flux)


def random_scenario(seed: int, duration: float = 40.0, max_speed: float = 200.0,
                    max_load: float = 20.0, flux_range: tuple = (0.45, 0.9)) -> Scenario:
    """Seeded random ramps/holds and load steps covering both rotation directions.

    A random flux program (levels drawn from ``flux_range`` in Wb) is added
    unless ``flux_range`` is None.
    """
    rng = np.random.default_rng(seed)
    speed = [(0.0, 0.0)]
    t, v = 0.0, 0.0
    while True:
        t += float(rng.uniform(0.5, 4.0))          # hold
        if t >= duration:
            break
        speed.append((t, v))
        target = float(rng.uniform(-max_speed, max_speed))
        t += float(rng.uniform(0.3, 3.0))          # ramp
        if t >= duration:
            break
        v = target
        speed.append((t, v))
    load = [(0.0, 0.0)]
    t = 0.0
    while True:
        t += float(rng.uniform(1.0, 6.0))
        if t >= duration:
            break
        val = 0.0 if rng.random() < 0.3 else float(rng.uniform(-max_load, max_load))
        load.append((t, val))
    flux = None
    if flux_range is not None:
        lo, hi = flux_range
        flux = [(0.0, hi)]
        t = 0.0
        while True:
            t += float(rng.uniform(2.0, 8.0))
            if t >= duration:
                break
            flux.append((t, flux[-1][1]))
            t += float(rng.uniform(0.2, 1.5))
            if t >= duration:
                break
            flux.append((t, float(rng.uniform(lo, hi))))
        flux = tuple(flux)
    return Scenario(duration, tuple(speed), tuple(load), seed=seed, name=f"random_{seed}", flux_profile=flux)
