"""Machine parameters and the five-component dq state."""

import math
from dataclasses import astuple, dataclass

from ..errors import InvalidInputError


@dataclass(frozen=True)
class MotorParams:
    """Induction machine constants (SI units).

    Defaults describe a generic 4 kW, 2-pole-pair, 400 V / 50 Hz machine.
    They are a plausible operating point for data generation, not a
    measured motor.
    """

    stator_resistance: float = 1.405
    rotor_resistance: float = 1.395
    stator_inductance: float = 0.178039
    rotor_inductance: float = 0.178039
    mutual_inductance: float = 0.1722
    pole_pairs: int = 2
    inertia: float = 0.0131
    friction_coeff: float = 0.002985

    def __post_init__(self):
        values = astuple(self)
        if not all(math.isfinite(v) and v > 0 for v in values):
            raise InvalidInputError(f"motor parameters must be finite and > 0: {self}")
        if int(self.pole_pairs) != self.pole_pairs:
            raise InvalidInputError("pole_pairs must be an integer")
        lm, ls, lr = self.mutual_inductance, self.stator_inductance, self.rotor_inductance
        if not lm * lm < ls * lr:
            raise InvalidInputError(
                "leakage must be positive: mutual_inductance**2 < stator_inductance * rotor_inductance"
            )

    @property
    def sigma_ls(self) -> float:
        """Transient (leakage) stator inductance ``Ls - Lm**2 / Lr``."""
        return self.stator_inductance - self.mutual_inductance ** 2 / self.rotor_inductance

    @property
    def rotor_time_constant(self) -> float:
        return self.rotor_inductance / self.rotor_resistance

    def packed(self) -> tuple:
        """Coefficient tuple consumed by the kernels (see ``_purepy``)."""
        lm, lr, rr = self.mutual_inductance, self.rotor_inductance, self.rotor_resistance
        kr = lm / lr
        pp = float(self.pole_pairs)
        return (
            float(self.stator_resistance),
            self.sigma_ls,
            kr,
            rr / lr,
            rr * lm / lr,
            pp,
            pp * kr,
            float(self.inertia),
            float(self.friction_coeff),
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class MotorState:
    """dq-frame state: stator currents (A), rotor fluxes (Wb), rotor speed (rad/s)."""

    i_sd: float = 0.0
    i_sq: float = 0.0
    phi_rd: float = 0.0
    phi_rq: float = 0.0
    omega_r: float = 0.0

    def as_tuple(self) -> tuple:
        return (self.i_sd, self.i_sq, self.phi_rd, self.phi_rq, self.omega_r)

    @classmethod
    def from_tuple(cls, values) -> "MotorState":
        return cls(*(float(v) for v in values))

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.as_tuple())


def electromagnetic_torque(state: MotorState, params: MotorParams) -> float:
    """tau_em = p * (Lm / Lr) * (phi_rd * i_sq - phi_rq * i_sd)."""
    return params.pole_pairs * (params.mutual_inductance / params.rotor_inductance) * (
        state.phi_rd * state.i_sq - state.phi_rq * state.i_sd
    )
