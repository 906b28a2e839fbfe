"""Command-line entry point ``qfeedback``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
import argparse
import csv
import math
import os
import platform
import sys

import numpy as np
import yaml

from . import __version__, _accel
from . import config as config_mod
from .control import bath_parameters, decay_rate, effective_temperature, optimal_gains, stationary_energy
from .control import temperature_kelvin
from .errors import HeatingRegime, InvalidAnalogy, InvalidInput, NumericalFailure, QFeedbackError
from .fockspace import fock_state, run_master_equation, thermal_state
from .gridsim import SERIES_COLUMNS, GridSimConfig, InitialGaussian, PotentialSpec, run_grid_ensemble
from .moments import MomentState, integrate_moments, stationary_moments
from .quadratures import FeedbackGains, OscillatorConfig, ZERO_GAINS
from .trajectories import EnsembleSpec, GaussianTrajectoryState, run_ensemble

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def fmt(x):
    """Shortest round-trip text for a float; stable across runs and platforms."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_csv(stream, header, rows):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])


class Output:
    """Writes CSV artifacts to ``--out`` or, without it, the main table to stdout."""

    def __init__(self, out_dir, stdout):
        self.out_dir = out_dir
        self.stdout = stdout
        self.files = []
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)

    def table(self, name, header, rows, main=False):
        if self.out_dir:
            path = os.path.join(self.out_dir, name)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                write_csv(fh, header, rows)
            self.files.append(name)
        elif main:
            write_csv(self.stdout, header, rows)

    def manifest(self, command, conf, seed, workers):
        if not self.out_dir:
            return
        import scipy

        doc = {
            "command": command,
            "config": conf,
            "seed": seed,
            "workers": workers,
            "artifacts": sorted(self.files),
            "versions": {
                "qfeedback": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "numba": _accel.numba.__version__ if _accel.HAVE_NUMBA else None,
                "pyyaml": yaml.__version__,
                "backend": _accel.backend(),
            },
        }
        with open(os.path.join(self.out_dir, "manifest.yaml"), "w", encoding="utf-8") as fh:
            yaml.safe_dump(doc, fh, sort_keys=True)


# -- subcommands ---------------------------------------------------------------------

def _kappa_grid(spec):
    try:
        a, b, kind, n = spec.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise InvalidInput(f"kappa grid must look like start:stop:log|lin:n, got {spec!r}") from None
    if n < 1 or kind not in ("log", "lin"):
        raise InvalidInput(f"bad kappa grid {spec!r}")
    if kind == "log":
        if not (a > 0 and b > 0):
            raise InvalidInput("log kappa grid needs positive bounds")
        return np.geomspace(a, b, n)
    return np.linspace(a, b, n)


def cmd_steady(conf, args, out):
    kappas = _kappa_grid(conf["kappa_grid"]) if conf["kappa_grid"] else [conf["kappa"]]
    unit = OscillatorConfig()
    rows = []
    for k in kappas:
        x, y, z = stationary_moments(k)
        g = optimal_gains(k, unit)
        rows.append((k, x, y, z, stationary_energy(k), g.u_tilde, g.v_tilde, decay_rate(k, 1.0)))
    out.table("steady.csv", ["kappa", "x", "y", "z", "E", "u", "v", "rate"], rows, main=True)


def cmd_moments(conf, args, out):
    ini = conf["initial"]
    s0 = MomentState(ini["x"], ini["y"], ini["z"])
    ser = integrate_moments(s0, conf["kappa"], conf["tau_end"], conf["dtau"], conf["record_stride"])
    rows = zip(ser.tau, ser.x, ser.y, ser.z, ser.defect)
    out.table("moments.csv", ["tau", "x", "y", "z", "defect"], rows, main=True)


def _ensemble_gains(conf):
    g = conf["gains"]
    if g["mode"] == "optimal":
        og = optimal_gains(conf["kappa"], OscillatorConfig())
        return FeedbackGains(og.u_tilde, og.v_tilde)
    if g["mode"] == "zero":
        return ZERO_GAINS
    if g["mode"] == "custom":
        return FeedbackGains(g["u_tilde"], g["v_tilde"])
    raise InvalidInput(f"unknown gains mode {g['mode']!r}")


def cmd_ensemble(conf, args, out):
    ini = conf["initial"]
    spec = EnsembleSpec(
        n_traj=conf["n_traj"], master_seed=conf["seed"], dtau=conf["dtau"], tau_end=conf["tau_end"],
        scheme=conf["scheme"], gains=_ensemble_gains(conf), kappa=conf["kappa"],
        record_stride=conf["record_stride"],
        initial=GaussianTrajectoryState(ini["Qbar"], ini["Pbar"], MomentState(ini["x"], ini["y"], ini["z"])),
        budget=conf["budget"])
    res = run_ensemble(spec, workers=args.workers)
    rows = zip(res.tau, res.mean_Q, res.std_Q, res.mean_P, res.std_P, res.mean_E, res.std_E)
    out.table("ensemble.csv", ["tau", "meanQ", "stdQ", "meanP", "stdP", "meanE", "stdE"], rows, main=True)


def grid_config(conf):
    kappa = conf["kappa"]
    if kappa < 0:
        raise InvalidInput("kappa must be >= 0")
    cfg = OscillatorConfig.from_kappa(kappa)
    g = conf["gains"]
    if g["mode"] == "optimal":
        og = optimal_gains(kappa, cfg).gains
        chi, delta = og.u, og.v
    elif g["mode"] == "zero":
        chi = delta = 0.0
    elif g["mode"] == "custom":
        chi, delta = g["chi"], g["delta"]
    else:
        raise InvalidInput(f"unknown gains mode {g['mode']!r}")
    pot = conf["potential"]
    potential = PotentialSpec(pot["kind"], a4=pot["a4"], a2=pot["a2"])
    ini = conf["initial"]
    return GridSimConfig(
        cfg=cfg, potential=potential, chi=chi, delta=delta, dt=conf["dt"], seed=conf["seed"],
        record_stride=conf["record_stride"], snapshot_stride=conf["snapshot_stride"],
        n_points=conf["n_points"], half_width=conf["half_width"],
        initial=InitialGaussian(ini["qbar"], ini["pbar"], ini["width"], ini["cov"]),
        leak_threshold=conf["leak_threshold"])


def cmd_grid(conf, args, out):
    gconf = grid_config(conf)
    runs = run_grid_ensemble(gconf, conf["tau_end"], conf["n_traj"], workers=args.workers)
    for i, run in enumerate(runs):
        s = run.series
        rows = zip(*(s[c] for c in SERIES_COLUMNS))
        name = "series.csv" if len(runs) == 1 else f"series_{i:04d}.csv"
        out.table(name, list(SERIES_COLUMNS), rows, main=(i == 0))
        if out.out_dir:
            q = run.grid.q
            prefix = "" if len(runs) == 1 else f"traj{i:04d}_"
            for j, (tau, dens) in enumerate(run.snapshots):
                out.table(f"{prefix}snapshot_{j:04d}.csv", ["q", "density"], zip(q, dens))
            if run.snapshots:
                out.table(f"{prefix}snapshot_times.csv", ["index", "tau"],
                          [(j, t) for j, (t, _) in enumerate(run.snapshots)])


def cmd_fock(conf, args, out):
    cfg = OscillatorConfig.from_kappa(conf["kappa"])
    gains = FeedbackGains(conf["gains"]["u"], conf["gains"]["v"])
    ini = conf["initial"]
    if ini["kind"] == "fock":
        k = int(ini["n"])
        rho0 = lambda n: fock_state(k, n)  # noqa: E731
    elif ini["kind"] == "thermal":
        rho0 = lambda n: thermal_state(ini["n"], n)  # noqa: E731
    else:
        raise InvalidInput(f"unknown initial kind {ini['kind']!r}")
    ser, n_used = run_master_equation(rho0, cfg, gains, conf["t_end"], conf["dt"], form=conf["form"],
                                      n_max=conf["n_max"], record_stride=conf["record_stride"])
    if n_used != conf["n_max"]:
        print(f"note: n_max raised to {n_used} after a truncation leak", file=sys.stderr)
    rows = zip(ser.t, ser.n_mean, ser.trace, ser.purity, ser.leak)
    out.table("fock.csv", ["t", "n_mean", "trace", "purity", "leak"], rows, main=True)


def cmd_design(conf, args, out):
    kappa = conf["kappa"]
    cfg = OscillatorConfig.from_kappa(kappa)
    g = conf["gains"]
    if g["mode"] == "optimal":
        gains = optimal_gains(kappa, cfg).gains
    elif g["mode"] == "custom":
        gains = FeedbackGains(g["u"], g["v"])
    else:
        raise InvalidInput(f"unknown gains mode {g['mode']!r}")
    rows = [("kappa", kappa), ("u", gains.u), ("v", gains.v)]
    regime = "cooling"
    if kappa > 0.1:
        print(f"warning: kappa = {kappa} is outside the rotating-wave regime (kappa << 1)", file=sys.stderr)
    try:
        bath = bath_parameters(gains, kappa, cfg)
    except HeatingRegime as exc:
        regime = "heating"
        print(f"warning: {exc}", file=sys.stderr)
        bath = None
    if bath is not None:
        rows += [("c", bath.c), ("gamma_prime", bath.gamma_prime), ("N", bath.N_bath), ("T_eff", bath.T_eff)]
        if gains.u == 0:
            try:
                rows.append(("T_eff_gain_route", effective_temperature(gains.v, kappa, cfg.omega)))
            except InvalidAnalogy as exc:
                print(f"warning: {exc}", file=sys.stderr)
        if conf["omega_si"] is not None:
            rows.append(("T_kelvin", temperature_kelvin(bath.T_eff, float(conf["omega_si"]))))
    rows.append(("regime", regime))
    out.table("design.csv", ["quantity", "value"], rows, main=True)


COMMANDS = {
    "steady": cmd_steady,
    "moments": cmd_moments,
    "ensemble": cmd_ensemble,
    "grid": cmd_grid,
    "fock": cmd_fock,
    "design": cmd_design,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML configuration document")
    common.add_argument("--preset", metavar="NAME", help="named configuration preset")
    common.add_argument("--seed", type=int, metavar="U64", help="master seed (stochastic commands)")
    common.add_argument("--workers", type=int, default=1, metavar="N", help="parallel workers")
    common.add_argument("--out", metavar="DIR", help="directory for CSV files and the manifest")
    common.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")

    parser = argparse.ArgumentParser(prog="qfeedback", description="Measurement and feedback cooling simulations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("steady", parents=[common], help="stationary moments, gains and decay rate")
    p.add_argument("--kappa", type=float)
    p.add_argument("--kappa-grid", metavar="A:B:log|lin:N")
    p = sub.add_parser("moments", parents=[common], help="moment flow time series")
    p.add_argument("--kappa", type=float)
    p = sub.add_parser("ensemble", parents=[common], help="Monte-Carlo ensemble of Gaussian trajectories")
    p.add_argument("--kappa", type=float)
    p.add_argument("--n-traj", type=int)
    p = sub.add_parser("grid", parents=[common], help="grid stochastic Schroedinger trajectories")
    p.add_argument("--kappa", type=float)
    p.add_argument("--tau-end", type=float)
    p = sub.add_parser("fock", parents=[common], help="master equation in the number basis")
    p.add_argument("--form", choices=["rwa", "full"])
    p.add_argument("--kappa", type=float)
    p = sub.add_parser("design", parents=[common], help="feedback design report")
    p.add_argument("--kappa", type=float)
    p.add_argument("--u", type=float, help="custom gain u (overrides the optimal design)")
    p.add_argument("--v", type=float, help="custom gain v (overrides the optimal design)")
    p.add_argument("--omega-si", type=float, help="angular frequency in rad/s for a kelvin temperature")
    return parser


def _overrides(args):
    o = {"kappa": getattr(args, "kappa", None)}
    if args.command == "steady":
        o["kappa_grid"] = args.kappa_grid
        if args.kappa is not None and args.kappa_grid is None:
            o["kappa_grid"] = ""  # an explicit --kappa wins over a configured grid
    if args.command in ("ensemble", "grid") and args.seed is not None:
        o["seed"] = args.seed
    if args.command == "ensemble":
        o["n_traj"] = args.n_traj
    if args.command == "grid":
        o["tau_end"] = args.tau_end
    if args.command == "fock":
        o["form"] = args.form
    if args.command == "design":
        o["omega_si"] = args.omega_si
        if args.u is not None or args.v is not None:
            o["gains"] = {"mode": "custom", "u": args.u or 0.0, "v": args.v or 0.0}
    return o


def _validate_kappa(command, conf):
    k = conf.get("kappa")
    if command == "grid":
        return
    if command == "steady" and conf["kappa_grid"]:
        return
    if k is None or not (isinstance(k, float) and math.isfinite(k) and k > 0):
        raise InvalidInput(f"kappa must be a finite number > 0, got {k}")


def main(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    try:
        if args.workers < 1:
            raise InvalidInput("--workers must be >= 1")
        doc = config_mod.load_document(args.config) if args.config else None
        conf = config_mod.resolve(args.command, args.preset, doc, _overrides(args))
        if args.print_config:
            stdout.write(config_mod.dump(conf))
            return EXIT_OK
        _validate_kappa(args.command, conf)
        out = Output(args.out, stdout)
        COMMANDS[args.command](conf, args, out)
        out.manifest(args.command, conf, conf.get("seed"), args.workers)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except QFeedbackError as exc:  # pragma: no cover
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
