"""Command-line interface: ``quasisquare {design,simulate,scan,reproduce}``.

Exit codes: 0 success, 2 bad input, 3 solver non-convergence, 4 integration
failure, 5 reproduction check failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, rio, tcap
from .errors import ConvergenceError, DesignError, IntegrationError
from .model import ControlWaveforms, PerturbationParams, SquarePulse
from .robustness import FitError, fidelity_scan, infidelity_fit
from .reproduce import FIG2_PEAK, FIGURES, RIO_AREA
from .specfun import erf
from .tables import TableFormatError, controls_columns, read_table, trajectory_columns, write_table
from .tdse import DEFAULT_SAMPLES, propagate, transfer_infidelity

log = logging.getLogger("quasisquare")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_INTEGRATION, EXIT_CHECK = 0, 2, 3, 4, 5

PROTOCOLS = ("rio", "tcap-sine", "tcap-hg", "flat-pi")

DEFAULTS = {
    "protocol": "rio",
    "n": 14,
    "a": 3.0,
    "N": 6,
    "omega0": None,  # resolved from --units for rio, 1 for flat-pi
    "area": RIO_AREA,  # base Gaussian area for TCAP
    "T": 1.0,
    "tf": 4.0,
    "samples": 4001,
    "grid_points": 512,
    "tol": 1e-6,
    "multistart": 5,
    "seed": 0,
    "units": "T",
}


class UsageError(Exception):
    pass


def _resolve(args, keys) -> dict:
    """Flags override the optional JSON config, which overrides defaults."""
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for k in keys:
        v = getattr(args, k, None)
        out[k] = v if v is not None else cfg.get(k, DEFAULTS[k])
    return out


def _out_dir(args) -> Path:
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _read_controls(path) -> ControlWaveforms:
    cols = read_table(path, ("t", "omega", "delta"))
    try:
        return ControlWaveforms(cols["t"], cols["omega"], cols["delta"], Path(path).stem)
    except ValueError as exc:
        raise TableFormatError(f"{path}: {exc}") from exc


def _json_dump(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _rio_seeds(k: int, seed: int):
    if k < 1:
        raise UsageError("multistart must be >= 1")
    seeds = list(rio.DEFAULT_SEEDS[:k])
    if k > len(seeds):
        rng = np.random.default_rng(seed)
        seeds += list(rng.uniform(np.pi, 7 * np.pi / 3, k - len(seeds)))
    return tuple(seeds)


def _rio_peak(cfg) -> float:
    if cfg["omega0"] is not None:
        return float(cfg["omega0"])
    if cfg["units"] == "T":
        return FIG2_PEAK
    if cfg["units"] == "omega0":
        return 1.0
    raise UsageError(f"unknown units {cfg['units']!r} (use T or omega0)")


# ---------------------------------------------------------------------------
# design builders (also used by reproduce)


def build_design(cfg: dict):
    """Return (controls, metadata) for a resolved configuration."""
    proto = cfg["protocol"]
    if proto not in PROTOCOLS:
        raise UsageError(f"unknown protocol {proto!r}")
    if cfg["samples"] < 2:
        raise UsageError("samples must be >= 2")
    meta = {"protocol": proto, "config": cfg, "version": __version__}
    if proto == "rio":
        if cfg["grid_points"] < 64:
            raise UsageError("grid_points must be >= 64")
        g = rio.solve_geodesic(cfg["grid_points"], cfg["tol"], _rio_seeds(cfg["multistart"], cfg["seed"]))
        design = rio.hg_rio_design(g, int(cfg["n"]), _rio_peak(cfg), cfg["samples"])
        c = design.controls
        meta.update({
            "geodesic_area": g.area, "gamma_f": g.gamma_final, "gamma_f_over_pi": g.gamma_final / np.pi,
            "residuals": list(g.residuals), "curvature_coeffs": g.curvature_coeffs.tolist(),
            "minima": [dict(m) for m in g.minima], "sigma": design.pulse.width,
            "units": "1/T (peak 2.77/T)" if cfg["units"] == "T" else "1/Omega0",
        })
        return c, meta, {"geodesic": g, "design": design}
    if proto == "flat-pi":
        peak = 1.0 if cfg["omega0"] is None else float(cfg["omega0"])
        if not peak > 0:
            raise UsageError("omega0 must be positive")
        sq = SquarePulse(peak, np.pi / peak)
        t = np.linspace(-0.5 * sq.duration, 0.5 * sq.duration, cfg["samples"])
        c = ControlWaveforms(t, np.full(t.size, peak), np.zeros(t.size), "flat pi")
        return c, meta, {}
    T = float(cfg["T"])
    if not T > 0 or not cfg["tf"] > 0 or not cfg["a"] >= 1:
        raise UsageError("TCAP needs T > 0, tf > 0 and a >= 1")
    base = (tcap.default_base_peak(cfg["area"], T), T)
    meta["base_peak"], meta["base_width"] = base
    if proto == "tcap-sine":
        d = tcap.design_sine(int(cfg["N"]), cfg["a"], base, (-cfg["tf"], cfg["tf"]), cfg["samples"])
    else:
        if not cfg["a"] > 1:
            raise UsageError("tcap-hg needs a > 1")
        d = tcap.design_hg(int(cfg["n"]), cfg["a"], base, cfg["tf"], cfg["samples"])
    meta.update(d.info)
    meta["boundary_violation"] = d.rescale.boundary_violation()
    meta["base_area_window"] = float(base[0] * T * np.sqrt(np.pi) * erf(cfg["tf"] / T))
    return d.controls, meta, {"tcap": d}


def _summary(c: ControlWaveforms, meta: dict) -> dict:
    meta = dict(meta)
    meta["pulse_area"] = c.pulse_area()
    meta["peak_rabi"] = c.peak()
    meta["max_abs_detuning"] = float(np.max(np.abs(c.detuning)))
    meta["duration"] = c.duration
    meta["samples"] = int(c.time_grid.size)
    return meta


# ---------------------------------------------------------------------------
# commands


def cmd_design(args) -> int:
    cfg = _resolve(args, list(DEFAULTS))
    c, meta, _ = build_design(cfg)
    out = _out_dir(args)
    write_table(out / "controls.csv", controls_columns(c))
    meta = _summary(c, meta)
    _json_dump(out / "design.json", meta)
    print(f"{cfg['protocol']}: area {meta['pulse_area']:.6f}, peak {meta['peak_rabi']:.6f} -> {out}")
    return EXIT_OK


def _perturbation(args) -> PerturbationParams:
    return PerturbationParams(args.alpha, args.delta, args.beta)


def simulate_controls(c: ControlWaveforms, p: PerturbationParams, samples: int):
    traj = propagate(c, p, output_grid=np.linspace(c.time_grid[0], c.time_grid[-1], samples))
    return traj, trajectory_columns(traj)


def cmd_simulate(args) -> int:
    c = _read_controls(args.controls)
    if args.samples < 2:
        raise UsageError("samples must be >= 2")
    traj, cols = simulate_controls(c, _perturbation(args), args.samples)
    out = _out_dir(args)
    write_table(out / "trajectory.csv", cols)
    print(repr(transfer_infidelity(traj)))
    return EXIT_OK


def cmd_scan(args) -> int:
    c = _read_controls(args.controls)
    lo, hi = args.range
    if args.points < 1 or (args.points > 1 and not hi > lo):
        raise UsageError("need points >= 1 and an increasing range")
    grid = np.array([lo]) if args.points == 1 else np.linspace(lo, hi, args.points)
    curve = fidelity_scan(c, args.axis, grid)
    out = _out_dir(args)
    write_table(out / f"scan_{args.axis}.csv", {
        "value": curve.values, "infidelity": curve.infidelity,
        "log10_infidelity": curve.log10_infidelity(),
    })
    if args.axis == "alpha":
        try:
            fit = infidelity_fit(curve)
            print(f"slope {fit.slope:.4f} on |alpha| in [1e-3, 1e-2] ({fit.points} points)")
        except FitError as exc:
            print(f"slope n/a: {exc}")
    print(f"{curve.values.size} points -> {out / f'scan_{args.axis}.csv'}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    out = _out_dir(args)
    checks = FIGURES[args.figure](out)
    _json_dump(out / "manifest.json", {"figure": args.figure, "version": __version__, "checks": checks})
    failed = [c for c in checks if not c["passed"]]
    for chk in checks:
        print(f"[{'PASS' if chk['passed'] else 'FAIL'}] {chk['name']}: {chk['detail']}")
    return EXIT_CHECK if failed else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quasisquare", description="Robust quasi-square two-level pulses")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--config", help="JSON file with default parameters")

    d = sub.add_parser("design", help="build controls for a protocol")
    common(d)
    d.add_argument("--protocol", choices=PROTOCOLS)
    d.add_argument("--n", type=int, help="hyper-Gaussian order (even)")
    d.add_argument("--a", type=float, help="TCAP contraction factor")
    d.add_argument("--N", type=int, help="number of sine terms")
    d.add_argument("--omega0", type=float, help="peak Rabi frequency (rio, flat-pi)")
    d.add_argument("--area", type=float, help="base Gaussian area (tcap)")
    d.add_argument("--T", type=float, help="base Gaussian width (tcap)")
    d.add_argument("--tf", type=float, help="half window t_f (tcap)")
    d.add_argument("--samples", type=int, help="control samples")
    d.add_argument("--grid-points", dest="grid_points", type=int, help="geodesic grid points")
    d.add_argument("--tol", type=float, help="geodesic residual tolerance")
    d.add_argument("--multistart", type=int, help="number of geodesic seeds")
    d.add_argument("--seed", type=int, help="rng seed for seeds beyond the fixed five")
    d.add_argument("--units", choices=("T", "omega0"), help="rio time unit: T (peak 2.77) or 1/Omega0")
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("simulate", help="propagate controls from the ground state")
    common(s)
    s.add_argument("controls", help="controls.csv")
    for name in ("alpha", "delta", "beta"):
        s.add_argument(f"--{name}", type=float, default=0.0)
    s.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("scan", help="infidelity along one perturbation axis")
    common(c)
    c.add_argument("controls")
    c.add_argument("--axis", choices=("alpha", "delta", "beta"), default="alpha")
    c.add_argument("--range", nargs=2, type=float, default=(-0.2, 0.2), metavar=("LO", "HI"))
    c.add_argument("--points", type=int, default=161)
    c.set_defaults(func=cmd_scan)

    r = sub.add_parser("reproduce", help="emit the data behind one figure")
    common(r)
    r.add_argument("figure", choices=("fig1", "fig2", "fig3", "fig4", "fig5"))
    r.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, TableFormatError, DesignError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc} {exc.info}", file=sys.stderr)
        return EXIT_SOLVER
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION


if __name__ == "__main__":
    sys.exit(main())
