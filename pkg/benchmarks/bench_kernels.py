"""Compiled vs pure-Python propagation kernel.

Times ``tdse.propagate`` with both backends on the shipped designs and checks
that they agree to rounding.

    python3 benchmarks/bench_kernels.py --repeat 5
"""
import argparse
import statistics
import time

import numpy as np

from quasisquare import rio, tcap, tdse
from quasisquare.model import ControlWaveforms, PerturbationParams


def designs(samples):
    g = rio.solve_geodesic(512, seeds=(5 * np.pi / 3,))
    yield "hG-RIO n=14", rio.hg_rio_design(g, 14, 2.77, samples).controls
    base = (tcap.default_base_peak(5.84), 1.0)
    yield "hG-TCAP n=14 a=3", tcap.design_hg(14, 3.0, base, 4.0, samples).controls
    t = np.linspace(0.0, np.pi, samples)
    yield "flat pi", ControlWaveforms(t, np.ones_like(t), np.zeros_like(t), "flat pi")


def timed(controls, backend, repeat, p):
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        traj = tdse.propagate(controls, p, backend=backend)
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs), traj


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--samples", type=int, default=4001)
    ap.add_argument("--alpha", type=float, default=0.05)
    args = ap.parse_args()
    if tdse._kernel_ext is None:
        raise SystemExit("compiled kernel not built; reinstall with Cython available")
    p = PerturbationParams(alpha=args.alpha)
    print(f"{'design':<20}{'steps':>8}{'compiled ms':>14}{'python ms':>12}{'speedup':>9}{'max |dpsi|':>12}")
    for name, c in designs(args.samples):
        tc, a = timed(c, "compiled", args.repeat, p)
        tp, b = timed(c, "python", args.repeat, p)
        diff = float(np.max(np.abs(a.states - b.states)))
        print(f"{name:<20}{a.nsteps:>8}{1e3 * tc:>14.2f}{1e3 * tp:>12.2f}{tp / tc:>9.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
