"""Fifth-order current/flux dq model of an induction machine.

The reference frame rotates at ``omega_s`` (electrical rad/s); the rotor
turns at ``omega_r`` (mechanical rad/s), so the slip pulsation is
``omega_s - p * omega_r``.  With ``sigma_ls = Ls - Lm**2 / Lr``:

    dphi_rd/dt = -(Rr/Lr) phi_rd + (Rr Lm/Lr) i_sd + (omega_s - p omega_r) phi_rq
    dphi_rq/dt = -(Rr/Lr) phi_rq + (Rr Lm/Lr) i_sq - (omega_s - p omega_r) phi_rd
    sigma_ls di_sd/dt = u_d - Rs i_sd - (Lm/Lr) dphi_rd/dt + omega_s (sigma_ls i_sq + (Lm/Lr) phi_rq)
    sigma_ls di_sq/dt = u_q - Rs i_sq - (Lm/Lr) dphi_rq/dt - omega_s (sigma_ls i_sd + (Lm/Lr) phi_rd)
    tau_em = p (Lm/Lr) (phi_rd i_sq - phi_rq i_sd)
    J domega_r/dt = tau_em - tau_load - B omega_r
"""

import math
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

from .. import _purepy
from ..errors import IntegrationDivergedError, InvalidInputError
from .params import MotorParams, MotorState


class MotorInputs(NamedTuple):
    u_d: float
    u_q: float
    load_torque: float = 0.0
    omega_s: float = 0.0


def _check_finite(*values, what="input"):
    for v in values:
        if not math.isfinite(v):
            raise InvalidInputError(f"non-finite {what}: {v!r}")


def motor_derivatives(state: MotorState, u_d: float, u_q: float, load_torque: float,
                      params: MotorParams, omega_s: float = 0.0) -> MotorState:
    """Time derivative of every state component.

    ``omega_s`` is the frame pulsation; the default 0 is the stationary frame.
    """
    _check_finite(*state.as_tuple(), what="state")
    _check_finite(u_d, u_q, load_torque, omega_s)
    d = _purepy.motor_rhs(*state.as_tuple(), u_d, u_q, load_torque, omega_s, params.packed())
    return MotorState.from_tuple(d)


InputSpec = Union[MotorInputs, Sequence[MotorInputs]]


def rk4_step(state: MotorState, inputs: InputSpec, dt: float, params: MotorParams) -> MotorState:
    """Advance ``state`` by one classical Runge-Kutta step.

    ``inputs`` is either one :class:`MotorInputs` held over the step or a
    triple sampled at ``t``, ``t + dt/2`` and ``t + dt``.
    """
    if not dt >= 0:
        raise InvalidInputError("dt must be non-negative")
    if isinstance(inputs, MotorInputs):
        at_t = at_mid = at_end = inputs
    else:
        at_t, at_mid, at_end = (MotorInputs(*i) for i in inputs)
    coef = params.packed()
    x = state.as_tuple()

    def f(y, inp):
        return _purepy.motor_rhs(*y, inp.u_d, inp.u_q, inp.load_torque, inp.omega_s, coef)

    h2 = 0.5 * dt
    a = f(x, at_t)
    b = f(tuple(x[i] + h2 * a[i] for i in range(5)), at_mid)
    c = f(tuple(x[i] + h2 * b[i] for i in range(5)), at_mid)
    d = f(tuple(x[i] + dt * c[i] for i in range(5)), at_end)
    s = dt / 6.0
    new = MotorState.from_tuple(
        x[i] + s * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]) for i in range(5))
    if not new.is_finite():
        raise IntegrationDivergedError("RK4 step produced a non-finite state")
    return new


def rk4(fun: Callable, t: float, y, dt: float):
    """Generic RK4 step for ``dy/dt = fun(t, y)`` on float or ndarray states."""
    y = np.asarray(y, dtype=float)
    k1 = np.asarray(fun(t, y))
    k2 = np.asarray(fun(t + 0.5 * dt, y + 0.5 * dt * k1))
    k3 = np.asarray(fun(t + 0.5 * dt, y + 0.5 * dt * k2))
    k4 = np.asarray(fun(t + dt, y + dt * k3))
    out = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationDivergedError("RK4 step produced a non-finite state", time=t)
    return out


def integrate(state: MotorState, inputs: MotorInputs, dt: float, n_steps: int,
              params: MotorParams) -> MotorState:
    """Open-loop integration with inputs held constant (uses the fast kernel)."""
    from .. import kernels

    x = state.as_tuple()
    coef = params.packed()
    for k in range(n_steps):
        x = kernels.rk4_motor(x, inputs.u_d, inputs.u_q, inputs.load_torque, inputs.omega_s, dt, coef)
        if not all(math.isfinite(v) for v in x):
            raise IntegrationDivergedError("open-loop integration diverged", time=(k + 1) * dt)
    return MotorState.from_tuple(x)
