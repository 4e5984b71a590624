import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from motordyn.sim import (
    ControllerState, FocGains, MotorParams, MotorState, default_scenario, field_weakening_flux,
    foc_controller_step, generate_run,
)

P = MotorParams()
G = FocGains.for_motor(P)
DT = 1.0 / 5000


def test_on_reference_outputs_are_feed_forward_only():
    flux = 0.9
    i_sd = flux / P.mutual_inductance
    state = MotorState(i_sd=i_sd, i_sq=0.0, phi_rd=flux, phi_rq=0.0, omega_r=100.0)
    ud, uq, ctrl = foc_controller_step({"speed": 100.0, "flux": flux}, state, ControllerState(), P, DT, G)
    omega_s = P.pole_pairs * 100.0
    kr = P.mutual_inductance / P.rotor_inductance
    assert ctrl.omega_s == pytest.approx(omega_s)
    assert ud == pytest.approx(0.0, abs=1e-12)
    assert uq == pytest.approx(omega_s * (P.sigma_ls * i_sd + kr * flux), rel=1e-12)
    assert ctrl.int_d == 0.0 and ctrl.int_q == 0.0


@given(err=st.floats(50, 400), w=st.floats(0, 200))
def test_voltage_command_clamped_to_limit(err, w):
    state = MotorState(0.0, 0.0, 0.9, 0.0, w)
    ud, uq, _ = foc_controller_step({"speed": w + err, "flux": 0.9}, state, ControllerState(), P, DT, G)
    assert math.hypot(ud, uq) <= G.u_max * (1 + 1e-12)


def test_large_error_saturates_exactly_on_limit():
    state = MotorState(0.0, -20.0, 0.9, 0.0, 0.0)
    ud, uq, _ = foc_controller_step({"speed": 200.0, "flux": 0.9}, state, ControllerState(), P, DT, G)
    assert math.hypot(ud, uq) == pytest.approx(G.u_max, rel=1e-12)


def test_closed_loop_settles_within_two_seconds():
    run = generate_run(default_scenario(5.0))
    t = run.times
    ref = 100.0
    late = np.abs(run["omega_r"][t >= 2.0] - ref)
    assert late.max() < 0.01 * ref


def test_field_weakening_profile():
    assert field_weakening_flux(0.0) == 0.9
    assert field_weakening_flux(-140.0) == 0.9
    assert field_weakening_flux(280.0) == pytest.approx(0.45)
    arr = field_weakening_flux(np.array([0.0, 200.0]))
    assert arr.shape == (2,)
