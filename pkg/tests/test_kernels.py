import os
import subprocess
import sys

import numpy as np
import pytest

from motordyn import kernels
from motordyn.sim import FocGains, MotorParams, named_scenario
from motordyn.sim.control import field_weakening_flux

BACKENDS = kernels.available_backends()
needs_ext = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def _loop_inputs(seconds=1.0):
    s = named_scenario("load_steps", seconds)
    n_samples = int(round(seconds * 250))
    t = np.arange((n_samples - 1) * 20 + 1) / 5000.0
    w = np.ascontiguousarray(s.speed_at(t), dtype=float)
    p = MotorParams()
    return (w, np.ascontiguousarray(field_weakening_flux(w)), np.ascontiguousarray(s.load_at(t), dtype=float),
            p.packed(), p.mutual_inductance, FocGains.for_motor(p).packed(1 / 5000.0), 5e-5, 4, 20), n_samples


def test_backend_is_reported():
    assert kernels.BACKEND in BACKENDS


@needs_ext
def test_closed_loop_backends_agree_bitwise():
    args, n = _loop_inputs()
    outs = {}
    for name, mod in BACKENDS.items():
        out = np.zeros((n, 9))
        assert mod.simulate_closed_loop(*args, out) == -1
        outs[name] = out
    assert outs["python"].tobytes() == outs["cython"].tobytes()


@needs_ext
def test_rk4_backends_agree():
    p = MotorParams().packed()
    x = (1.0, -2.0, 0.4, 0.1, 40.0)
    a = BACKENDS["python"].rk4_motor(x, 30.0, 200.0, 3.0, 150.0, 5e-5, p)
    b = BACKENDS["cython"].rk4_motor(x, 30.0, 200.0, 3.0, 150.0, 5e-5, p)
    assert tuple(a) == tuple(b)


@needs_ext
@pytest.mark.parametrize("reverse", [False, True])
def test_diag_scan_backends_agree(rng, reverse):
    x = rng.normal(size=(3, 4, 7))
    w, u, b = rng.normal(size=(3, 4))
    h0 = rng.normal(size=(3, 4))
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    hs_py = py.diag_scan_forward(x, w, u, b, h0, reverse)
    hs_cy = cy.diag_scan_forward(x, w, u, b, h0, reverse)
    assert np.allclose(hs_py, hs_cy, rtol=0, atol=1e-14)
    d = rng.normal(size=x.shape)
    for a, c in zip(py.diag_scan_backward(d, x, hs_py, h0, w, u, reverse),
                    cy.diag_scan_backward(d, x, hs_py, h0, w, u, reverse)):
        assert np.allclose(a, c, rtol=1e-13, atol=1e-14)


def test_env_var_forces_python_fallback():
    env = dict(os.environ, MOTORDYN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from motordyn import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
