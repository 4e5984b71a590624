"""Cascaded PI field-oriented controller (indirect rotor-flux orientation).

Structure, run once per controller period ``dt`` (sample and hold):

* flux loop: ``i_sd_ref = flux_ref / Lm + PI(flux_ref - phi_rd)``, clamped to ``+-id_max``
* speed loop: ``i_sq_ref = PI(speed_ref - omega_r)``, clamped to
  ``+-sqrt(i_max**2 - i_sd_ref**2)``
* frame pulsation: ``omega_s = p * omega_r + (Rr Lm / Lr) * i_sq / max(phi_rd, flux_min)``
* current loops: ``u = PI(i_ref - i) + decoupling``, with decoupling
  ``u_d_ff = -omega_s * sigma_ls * i_sq`` and
  ``u_q_ff = omega_s * (sigma_ls * i_sd + (Lm / Lr) * phi_rd)``
* the voltage vector is scaled onto the circle ``|u| = u_max`` when it
  exceeds it; current integrators are frozen while clamped, and the outer
  integrators only integrate while unsaturated or unwinding.
"""

import math
from dataclasses import dataclass

import numpy as np

from .. import _purepy
from .params import MotorParams, MotorState


@dataclass(frozen=True)
class FocGains:
    kp_current: float
    ki_current: float
    kp_flux: float
    ki_flux: float
    kp_speed: float
    ki_speed: float
    i_max: float = 25.0
    id_max: float = 15.0
    u_max: float = 320.0
    flux_min: float = 0.05

    @classmethod
    def for_motor(cls, params: MotorParams, rated_flux: float = 0.9,
                  current_bw: float = 2 * math.pi * 150.0, flux_bw: float = 15.0,
                  speed_bw: float = 40.0, **limits) -> "FocGains":
        """Pole-placement tuning from the machine constants."""
        kr = params.mutual_inductance / params.rotor_inductance
        r_eq = params.stator_resistance + params.rotor_resistance * kr * kr
        kt = params.pole_pairs * kr * rated_flux
        kp_speed = params.inertia * speed_bw / kt
        return cls(
            kp_current=params.sigma_ls * current_bw,
            ki_current=r_eq * current_bw,
            kp_flux=params.rotor_time_constant * flux_bw / params.mutual_inductance,
            ki_flux=flux_bw / params.mutual_inductance,
            kp_speed=kp_speed,
            ki_speed=kp_speed * speed_bw / 4.0,
            **limits,
        )

    def packed(self, tc: float) -> tuple:
        return (
            self.kp_current, self.ki_current, self.kp_flux, self.ki_flux,
            self.kp_speed, self.ki_speed, self.i_max, self.id_max, self.u_max,
            self.flux_min, float(tc),
        )


@dataclass(frozen=True)
class ControllerState:
    int_d: float = 0.0
    int_q: float = 0.0
    int_flux: float = 0.0
    int_speed: float = 0.0
    omega_s: float = 0.0

    def as_tuple(self):
        return (self.int_d, self.int_q, self.int_flux, self.int_speed, self.omega_s)


def field_weakening_flux(speed_ref, rated_flux: float = 0.9, base_speed: float = 140.0):
    """Rotor-flux reference: rated below ``base_speed``, ``~1/|speed|`` above it."""
    speed = np.abs(np.asarray(speed_ref, dtype=float))
    flux = rated_flux * base_speed / np.maximum(speed, base_speed)
    return flux if flux.ndim else float(flux)


def foc_controller_step(reference, state: MotorState, controller_state: ControllerState,
                        params: MotorParams, dt: float, gains: FocGains = None):
    """One controller period.

    ``reference`` is a mapping with keys ``speed`` (rad/s) and ``flux`` (Wb).
    Returns ``(u_d, u_q, new_controller_state)``; the frame pulsation to
    apply during the next period is ``new_controller_state.omega_s``.
    """
    if gains is None:
        gains = FocGains.for_motor(params)
    ud, uq, ctrl = _purepy.foc_step(
        float(reference["speed"]), float(reference["flux"]), state.as_tuple(),
        controller_state.as_tuple(), params.packed(), params.mutual_inductance,
        gains.packed(dt),
    )
    return ud, uq, ControllerState(*ctrl)
