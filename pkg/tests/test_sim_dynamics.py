import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import fsolve

from motordyn.errors import IntegrationDivergedError, InvalidInputError
from motordyn.sim import (
    MotorInputs, MotorParams, MotorState, electromagnetic_torque, integrate, motor_derivatives, rk4,
    rk4_step,
)

P = MotorParams()


def test_origin_is_equilibrium():
    d = motor_derivatives(MotorState(), 0.0, 0.0, 0.0, P)
    assert d.as_tuple() == (0.0, 0.0, 0.0, 0.0, 0.0)


@given(a=st.floats(-30, 30), b=st.floats(-30, 30), c=st.floats(-0.05, 0.05))
def test_balanced_torque_keeps_speed(a, b, c):
    # phi_rd * i_sq == phi_rq * i_sd by construction
    no_friction = MotorParams(friction_coeff=1e-300)
    state = MotorState(i_sd=a, i_sq=b, phi_rd=c * a, phi_rq=c * b, omega_r=0.0)
    assert electromagnetic_torque(state, no_friction) == pytest.approx(0.0, abs=1e-9)
    d = motor_derivatives(state, 10.0, -5.0, 0.0, no_friction)
    assert abs(d.omega_r) < 1e-9


@pytest.mark.parametrize("omega_s,u_d,u_q,load", [
    (2 * math.pi * 50, 20.0, 300.0, 10.0),
    (2 * math.pi * 20, 10.0, 120.0, -5.0),
    (0.0, 8.0, 0.0, 0.0),
])
def test_steady_state_from_root_solver(omega_s, u_d, u_q, load):
    def residual(x):
        return motor_derivatives(MotorState(*x), u_d, u_q, load, P, omega_s=omega_s).as_tuple()

    guess = [5.0, 5.0, 0.8, 0.0, omega_s / P.pole_pairs * 0.97]
    root, info, ok, msg = fsolve(residual, guess, full_output=True, xtol=1e-13)
    assert ok == 1, msg
    assert np.linalg.norm(residual(root)) < 1e-9


def test_non_finite_inputs_rejected():
    with pytest.raises(InvalidInputError):
        motor_derivatives(MotorState(i_sd=float("nan")), 0, 0, 0, P)
    with pytest.raises(InvalidInputError):
        motor_derivatives(MotorState(), float("inf"), 0, 0, P)


def test_rk4_zero_step_is_identity():
    s = MotorState(1.0, -2.0, 0.3, 0.1, 50.0)
    assert rk4_step(s, MotorInputs(100.0, 50.0, 3.0, 10.0), 0.0, P) == s


def test_rk4_local_error_on_exponential_decay():
    errs = []
    for dt in (0.1, 0.05):
        y = rk4(lambda t, y: -y, 0.0, 1.0, dt)
        errs.append(abs(float(y) - math.exp(-dt)))
    # local error O(dt^5): halving dt divides it by ~32
    assert errs[0] / errs[1] == pytest.approx(32.0, rel=0.1)
    assert errs[0] < 0.1 ** 5 / 100


def _reference_run(dt, t_end, start, inputs):
    return np.array(integrate(start, inputs, dt, int(round(t_end / dt)), P).as_tuple())


def test_rk4_global_convergence_order():
    start = MotorState(0.0, 0.0, 0.0, 0.0, 0.0)
    inputs = MotorInputs(40.0, 230.0, 5.0, 2 * math.pi * 30)
    t_end = 0.02
    ref = _reference_run(1e-6, t_end, start, inputs)
    errs = [np.linalg.norm(_reference_run(dt, t_end, start, inputs) - ref) for dt in (4e-4, 2e-4, 1e-4)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 3.9, orders


def test_rk4_step_matches_fast_kernel():
    s = MotorState(1.0, 2.0, 0.5, -0.1, 30.0)
    inp = MotorInputs(50.0, 100.0, 2.0, 60.0)
    a = rk4_step(s, inp, 5e-5, P)
    b = integrate(s, inp, 5e-5, 1, P)
    assert a.as_tuple() == pytest.approx(b.as_tuple(), rel=1e-13, abs=1e-13)


def test_divergence_is_reported():
    with pytest.raises(IntegrationDivergedError):
        rk4_step(MotorState(1e200, 1e200, 1e200, 1e200, 1e200), MotorInputs(0, 0), 1.0, P)
    with pytest.raises(IntegrationDivergedError) as exc:
        integrate(MotorState(1e150, 0, 0, 0, 0), MotorInputs(0.0, 0.0, 0.0, 1e150), 1.0, 50, P)
    assert exc.value.time is not None


@pytest.mark.parametrize("field,value", [
    ("stator_resistance", 0.0), ("inertia", -1.0), ("pole_pairs", 1.5), ("mutual_inductance", 0.2),
])
def test_invalid_params_rejected(field, value):
    with pytest.raises(InvalidInputError):
        MotorParams(**{field: value})
