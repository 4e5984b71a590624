"""Time the compiled kernels against their pure-Python twins.

    python3 benchmarks/bench_kernels.py [--seconds 2.0] [--repeat 3]

Both backends run on identical inputs.  The closed-loop simulations must
agree bit for bit; the recurrent scans agree to rounding (libm and numpy
``tanh`` may differ in the last ulp), so their largest gap is printed.
"""

import argparse
import timeit

import numpy as np

from motordyn.kernels import available_backends
from motordyn.sim import FocGains, MotorParams, SimConfig, default_scenario, field_weakening_flux
from motordyn.sim.run import SAMPLE_RATE


def closed_loop_args(seconds):
    params, cfg = MotorParams(), SimConfig()
    gains = FocGains.for_motor(params, rated_flux=cfg.rated_flux)
    scenario = default_scenario(seconds)
    n_samples = int(round(seconds * SAMPLE_RATE))
    n_ctrl = (n_samples - 1) * cfg.decimation + 1
    t = np.arange(n_ctrl) / cfg.control_rate
    w_ref = np.ascontiguousarray(scenario.speed_at(t), dtype=np.float64)
    flux = np.ascontiguousarray(field_weakening_flux(w_ref, cfg.rated_flux, cfg.base_speed), dtype=np.float64)
    load = np.ascontiguousarray(scenario.load_at(t), dtype=np.float64)
    fixed = (params.packed(), float(params.mutual_inductance), gains.packed(1.0 / cfg.control_rate),
             float(cfg.dt), cfg.substeps, cfg.decimation)
    return w_ref, flux, load, fixed, n_samples


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seconds", type=float, default=2.0, help="simulated time per closed-loop call")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = available_backends()
    if len(backends) < 2:
        print("compiled extension not built; only the pure-Python backend is available")

    w_ref, flux, load, fixed, n_samples = closed_loop_args(args.seconds)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(32, 16, 100))
    w, u, b = rng.normal(size=(3, 16)) * 0.5
    h0 = np.zeros((32, 16))
    dout = rng.normal(size=x.shape)

    results, outputs = {}, {}
    for name, mod in backends.items():
        out = np.zeros((n_samples, 9))

        def sim():
            mod.simulate_closed_loop(w_ref, flux, load, *fixed, out)

        def scan():
            hs = mod.diag_scan_forward(x, w, u, b, h0, False)
            mod.diag_scan_backward(dout, x, hs, h0, w, u, False)
            return hs

        results[name] = {
            "closed_loop": min(timeit.repeat(sim, number=1, repeat=args.repeat)),
            "diag_scan": min(timeit.repeat(scan, number=1, repeat=args.repeat)),
        }
        outputs[name] = (out.copy(), scan())

    if len(outputs) == 2:
        (a_sim, a_scan), (b_sim, b_scan) = outputs.values()
        print(f"closed loop identical: {np.array_equal(a_sim, b_sim)}; "
              f"diag scan max gap {np.max(np.abs(a_scan - b_scan)):.1e}")
    print(f"{'kernel':<14}" + "".join(f"{n:>12}" for n in results) + ("     speedup" if len(results) == 2 else ""))
    for kernel in ("closed_loop", "diag_scan"):
        times = [results[n][kernel] for n in results]
        row = f"{kernel:<14}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
