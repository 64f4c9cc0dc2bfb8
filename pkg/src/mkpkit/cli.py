"""``mkpkit`` command-line entry point.

Every subcommand prints its primary output to stdout. With ``--out-dir`` the
same data is written to files there together with ``manifest.json``, which
records everything needed to reproduce the run.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import random
import sys
import time
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .conservation_laws import (
    builtin_conservation_laws,
    conservation_law,
    multiplier_formula,
    verify_case,
    verify_characteristic,
    verify_determining,
)
from .jettext import to_text
from .model import CaseParams
from .multiplier_solver import build_ansatz, solve_case
from .solitons import (
    InadmissibleSolitonError,
    LineSolitonParams,
    ProfileConstraintError,
    ProfileHW,
    height_width,
    kinematic_admissible,
    params_from_hw,
    profile,
    profile_from_hw,
    speed_bounds,
)

SCHEMA = "mkpkit.report/1"
FIELDS = ("rational", "kappa-sq-2")


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    subcommand: str
    case: dict | None
    parameters: dict
    seed: int
    outputs: list[str] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "version": __version__,
            "subcommand": self.subcommand,
            "case": self.case,
            "parameters": self.parameters,
            "seed": self.seed,
            "outputs": sorted(self.outputs),
        }


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class Output:
    """Collects named outputs, then writes them (and the manifest) in order."""

    def __init__(self, args, manifest: RunManifest):
        self.dir = Path(args.out_dir) if args.out_dir else None
        self.manifest = manifest
        self.files: list[tuple[str, bytes]] = []

    def add(self, name: str, data: str | bytes) -> None:
        self.files.append((name, data.encode() if isinstance(data, str) else data))
        self.manifest.outputs.append(name)

    def flush(self) -> None:
        if self.dir is None:
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        for name, data in self.files:
            (self.dir / name).write_bytes(data)
        (self.dir / "manifest.json").write_text(_dumps(self.manifest.to_dict()))


# --------------------------------------------------------------------------
# argument parsing


def _sign(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected +1 or -1, got {text!r}") from None
    if v not in (1, -1):
        raise argparse.ArgumentTypeError(f"expected +1 or -1, got {text!r}")
    return v


def _rational(text: str) -> Fraction:
    try:
        v = Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("kappa^2 must be positive")
    return v


def _grid(text: str) -> tuple[int, int]:
    try:
        nx, ny = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 256x64, got {text!r}") from None
    return nx, ny


def _add_case(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma1", type=_sign, required=True)
    p.add_argument("--sigma2", type=_sign, required=True)
    p.add_argument("--kappa-sq", type=_rational, required=True)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--field", choices=FIELDS,
                        help="coefficient field; must agree with --kappa-sq when given")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", help="write outputs and manifest.json here")
    common.add_argument("--timings", action="store_true", help="include wall-clock times")

    parser = argparse.ArgumentParser(prog="mkpkit")
    parser.add_argument("--version", action="version", version=f"mkpkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="certify multipliers and conservation laws")
    _add_case(p)
    p.add_argument("--random-kappa", type=int, default=0, metavar="N",
                   help="also check Q1, Q2, CL1, CL2 for N random rational kappa in (0, 4]")

    p = sub.add_parser("multipliers", parents=[common], help="solve the determining system")
    _add_case(p)
    p.add_argument("--jet-order", type=int, default=3)
    p.add_argument("--jet-degree", type=int, default=3)
    p.add_argument("--poly-degree", type=int, default=1)
    p.add_argument("--deep", action="store_true", help="raise the polynomial degree to 3")

    p = sub.add_parser("soliton", parents=[common], help="sample a line-soliton profile")
    _add_case(p)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--xi-max", type=float, default=20.0)
    p.add_argument("--samples", type=int, default=401)
    p.add_argument("--emit", choices=("csv", "json"), default="csv")

    p = sub.add_parser("kinregion", parents=[common], help="admissible speed interval per direction")
    _add_case(p)
    p.add_argument("--theta-samples", type=int, required=True)
    p.add_argument("--emit", choices=("csv", "json"), default="csv")

    p = sub.add_parser("profile", parents=[common], help="profile from height and width")
    p.add_argument("--height", type=float, required=True)
    p.add_argument("--width", type=float, required=True)
    p.add_argument("--regime", choices=("focussing", "defocussing"), required=True)
    p.add_argument("--sigma2", type=_sign, help="with --kappa-sq, also report mu and nu")
    p.add_argument("--kappa-sq", type=_rational)
    p.add_argument("--xi-max", type=float, default=20.0)
    p.add_argument("--samples", type=int, default=401)
    p.add_argument("--emit", choices=("csv", "json"), default="csv")

    p = sub.add_parser("simulate", parents=[common], help="evolve a mu = 0 line soliton")
    _add_case(p)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--grid", type=_grid, default=(256, 64))
    p.add_argument("--Lx", type=float, default=32.0)
    p.add_argument("--Ly", type=float, default=8.0)
    p.add_argument("--dt", type=float, default=0.005)
    p.add_argument("--t-end", type=float, default=5.0)
    p.add_argument("--save-every", type=int, default=100)
    p.add_argument("--box", type=float, default=16.0, help="half-width of the charge-balance box")
    p.add_argument("--tolerance", type=float, default=0.02,
                   help="relative tolerance on speed and peak amplitude")
    p.add_argument("--emit", choices=("csv", "json"), default="json")
    return parser


def _case(args) -> CaseParams:
    case = CaseParams(args.sigma1, args.sigma2, args.kappa_sq)
    if args.field is not None and args.field != case.field.tag:
        raise UsageError(f"--field {args.field} does not match kappa^2 = {case.kappa_sq} "
                         f"(needs {case.field.tag})")
    return case


# --------------------------------------------------------------------------
# subcommands (each returns (ok, stdout text))


def _random_kappas(seed: int, n: int) -> list[Fraction]:
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        k = Fraction(rng.randint(1, 400), rng.randint(1, 100))
        if 0 < k <= 4 and k not in out:
            out.append(k)
    return out


def cmd_verify(args, out: Output) -> tuple[bool, str]:
    case = _case(args)
    reports = [r.to_dict(args.timings) for r in verify_case(case)]
    laws = [law.label for law in builtin_conservation_laws(case)]
    certified = [
        label for label in laws
        if all(r["ok"] for r in reports if r["label"] in (label, "Q" + label[2:]))
    ]
    extra = []
    for kappa in _random_kappas(args.seed, args.random_kappa):
        rc = CaseParams.from_kappa(args.sigma1, args.sigma2, kappa)
        for label in ("Q1", "Q2"):
            extra.append({"kappa": str(kappa), **verify_determining(multiplier_formula(label, rc)).to_dict(args.timings)})
        for label in ("CL1", "CL2"):
            extra.append({"kappa": str(kappa), **verify_characteristic(conservation_law(label, rc)).to_dict(args.timings)})
    ok = all(r["ok"] for r in reports) and all(r["ok"] for r in extra)
    doc = {
        "schema": SCHEMA,
        "subcommand": "verify",
        "case": case.describe(),
        "ok": ok,
        "certified": certified,
        "reports": reports,
        "random_kappa": extra,
    }
    text = _dumps(doc)
    out.add("report.json", text)
    return ok, text


def cmd_multipliers(args, out: Output) -> tuple[bool, str]:
    case = _case(args)
    a = build_ansatz(args.jet_order, args.jet_degree, args.poly_degree, deep=args.deep)
    out.manifest.parameters["ansatz"] = a.describe()
    start = time.perf_counter()
    ker = solve_case(case, a)
    elapsed = time.perf_counter() - start
    basis = "".join(to_text(e) + "\n" for e in ker.expressions())
    table = {
        "schema": SCHEMA,
        "subcommand": "multipliers",
        "case": case.describe(),
        "ansatz": a.describe(),
        "rows": ker.system.shape[0],
        "rank": ker.rank,
        "dimension": ker.dimension,
        "elapsed": elapsed if args.timings else None,
    }
    out.add("kernel.txt", basis)
    out.add("dimension.json", _dumps(table))
    return True, basis + _dumps(table)


def _xi_samples(args) -> np.ndarray:
    if args.samples < 2:
        raise UsageError("--samples must be at least 2")
    return np.linspace(-args.xi_max, args.xi_max, args.samples)


def _emit_curve(args, out: Output, names: tuple[str, str], xs, ys, extra: dict) -> str:
    if args.emit == "csv":
        text = _csv_text(list(names), zip(xs, ys))
        out.add("profile.csv", text)
    else:
        doc = {"schema": SCHEMA, **extra, names[0]: [float(v) for v in xs], names[1]: [float(v) for v in ys]}
        text = _dumps(doc)
        out.add("profile.json", text)
    return text


def cmd_soliton(args, out: Output) -> tuple[bool, str]:
    case = _case(args)
    p = LineSolitonParams(args.mu, args.nu, case)
    if not kinematic_admissible(p):
        raise InadmissibleSolitonError(f"(mu, nu) = ({args.mu}, {args.nu}) is not admissible for {case}")
    xi = _xi_samples(args)
    q = height_width(p)
    extra = {"case": case.describe(), "mu": args.mu, "nu": args.nu, "height": q.h, "width": q.w}
    return True, _emit_curve(args, out, ("xi", "u"), xi, profile(p, xi), extra)


def _thetas(n: int) -> np.ndarray:
    if n < 1:
        raise UsageError("--theta-samples must be positive")
    return -math.pi / 2 + math.pi * np.arange(1, n + 1) / (n + 1)


def cmd_kinregion(args, out: Output) -> tuple[bool, str]:
    case = _case(args)
    rows = []
    for theta in _thetas(args.theta_samples):
        b = speed_bounds(case, float(theta))
        rows.append((float(theta), b.c_min, b.c_max))
    if args.emit == "csv":
        text = _csv_text(["theta", "c_min", "c_max"], rows)
        out.add("kinregion.csv", text)
    else:
        doc = {"schema": SCHEMA, "case": case.describe(),
               "rows": [dict(zip(("theta", "c_min", "c_max"), r)) for r in rows]}
        text = _dumps(doc)
        out.add("kinregion.json", text)
    return True, text


def cmd_profile(args, out: Output) -> tuple[bool, str]:
    q = ProfileHW(args.height, args.width, args.regime)
    extra: dict = {"height": q.h, "width": q.w, "regime": q.regime}
    if (args.kappa_sq is None) != (args.sigma2 is None):
        raise UsageError("--sigma2 and --kappa-sq must be given together")
    if args.kappa_sq is not None:
        s1 = 1 if q.regime == "focussing" else -1
        case = CaseParams(s1, args.sigma2, args.kappa_sq)
        if args.field is not None and args.field != case.field.tag:
            raise UsageError(f"--field {args.field} does not match kappa^2 = {case.kappa_sq}")
        p = params_from_hw(q, case)
        extra.update(case=case.describe(), mu=p.mu, nu=p.nu)
        out.manifest.case = case.describe()
    xi = _xi_samples(args)
    return True, _emit_curve(args, out, ("xi", "u"), xi, profile_from_hw(q, xi), extra)


def cmd_simulate(args, out: Output) -> tuple[bool, str]:
    from .numeric_verify import (
        BlowUpError, EvolutionConfig, Grid2D, TrackingError, charge_balance, evolve,
        soliton_field, track_speed,
    )

    case = _case(args)
    if args.mu != 0:
        raise UsageError("only mu = 0 solitons are evolved; oblique ones are checked by residual")
    nx, ny = args.grid
    try:
        grid = Grid2D(args.Lx, args.Ly, nx, ny)
        cfg = EvolutionConfig(args.dt, args.t_end, save_every=args.save_every)
        cfg.validate(grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    p = LineSolitonParams(0.0, args.nu, case)
    u0 = soliton_field(p, grid)
    start = time.perf_counter()
    doc: dict = {"schema": SCHEMA, "subcommand": "simulate", "case": case.describe(),
                 "mu": 0.0, "nu": args.nu, "grid": grid.describe(), "dt": args.dt, "t_end": args.t_end}
    try:
        traj = evolve(u0, case, cfg)
    except BlowUpError as exc:
        doc.update(ok=False, blowup_time=exc.t)
        text = _dumps(doc)
        out.add("simulate.json", text)
        return False, text
    elapsed = time.perf_counter() - start
    peak0 = float(u0.u.max())
    amps = np.array([float(u.max()) for u in traj.snapshots])
    try:
        speed = track_speed(traj).nu
    except TrackingError as exc:
        speed = math.nan
        doc["tracking_error"] = str(exc)
    amp_drift = float(np.max(np.abs(amps - peak0)) / peak0)
    speed_err = abs(speed - args.nu) / abs(args.nu) if args.nu else abs(speed)
    ok = bool(speed_err <= args.tolerance and amp_drift <= args.tolerance)
    law = conservation_law("CL1", case)
    series = charge_balance(traj, law, args.box, args.box * args.Ly / args.Lx)
    doc.update(
        ok=ok,
        measured_nu=speed,
        speed_error=speed_err,
        amplitude_drift=amp_drift,
        times=[float(t) for t in traj.times],
        elapsed=elapsed if args.timings else None,
    )
    sidecar = {"schema": SCHEMA, "dtype": "float64", "order": "C",
               "shape": [len(traj), grid.Ny, grid.Nx], "grid": grid.describe(),
               "times": [float(t) for t in traj.times]}
    out.add("trajectory.bin", np.ascontiguousarray(np.stack(traj.snapshots), dtype="<f8").tobytes())
    out.add("trajectory.json", _dumps(sidecar))
    flux_csv = _csv_text(["t", "flux"], series)
    out.add("charge_balance.csv", flux_csv)
    doc["charge_balance"] = [[float(t), float(v)] for t, v in series]
    text = _dumps(doc)
    out.add("simulate.json", text)
    return ok, flux_csv if args.emit == "csv" else text


COMMANDS = {
    "verify": cmd_verify,
    "multipliers": cmd_multipliers,
    "soliton": cmd_soliton,
    "kinregion": cmd_kinregion,
    "profile": cmd_profile,
    "simulate": cmd_simulate,
}

_PARAM_SKIP = {"command", "field", "seed", "out_dir", "timings", "sigma1", "sigma2", "kappa_sq"}


def _manifest(args) -> RunManifest:
    case = None
    if getattr(args, "sigma1", None) is not None:
        case = CaseParams(args.sigma1, args.sigma2, args.kappa_sq).describe()
    params = {}
    for k, v in sorted(vars(args).items()):
        if k in _PARAM_SKIP:
            continue
        params[k] = list(v) if isinstance(v, tuple) else (str(v) if isinstance(v, Fraction) else v)
    params["field"] = args.field
    params["timings"] = args.timings
    return RunManifest(args.command, case, params, args.seed)


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    manifest = _manifest(args)
    out = Output(args, manifest)
    try:
        ok, text = COMMANDS[args.command](args, out)
    except UsageError as exc:
        parser.error(str(exc))
    except (InadmissibleSolitonError, ProfileConstraintError, ValueError) as exc:
        doc = {"schema": SCHEMA, "subcommand": args.command, "ok": False,
               "error": type(exc).__name__, "message": str(exc)}
        text = _dumps(doc)
        out.add("failure.json", text)
        out.flush()
        sys.stdout.write(text)
        return 1
    out.flush()
    sys.stdout.write(text)
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
