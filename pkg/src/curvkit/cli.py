"""``curvkit`` command line.

Commands::

    curvkit identities [--seed S] [--sizes 3,4] [--trials 100]
    curvkit verify {toda,sg,nls} [example flags] [--field FILE] [--out REPORT] [--dump DIR]
    curvkit simulate {toda,sg,nls} --out FILE [solver flags] [--csv FILE]
    curvkit dump FIELD --csv OUT

Exit codes: 0 checks passed, 1 checks failed, 2 configuration or I/O error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, fieldio, lax, pipelines, sim
from .errors import CurvkitError, NumericalError

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
SCHEMA_VERSION = 1


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _size(text: str) -> tuple[int, int]:
    try:
        rows, cols = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}") from None
    return rows, cols


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curvkit", description="Semi-discrete curvature checks for lattice integrable systems.")
    parser.add_argument("--version", action="version", version=f"curvkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ident = sub.add_parser("identities", help="run the algebraic identity suites")
    ident.add_argument("--seed", type=int, default=0)
    ident.add_argument("--sizes", type=_ints, default=[3, 4], help="lattice points per direction, e.g. 3,4")
    ident.add_argument("--trials", type=int, default=100)
    ident.add_argument("--tolerance", type=float, default=pipelines.TOLERANCES["identity"])
    ident.add_argument("--out", type=Path)

    verify = sub.add_parser("verify", help="zero-curvature verification of an example")
    vsub = verify.add_subparsers(dest="example", required=True)

    toda = vsub.add_parser("toda")
    toda.add_argument("--size", type=_size, default=(64, 64), help="rows x sites, e.g. 64x64")
    toda.add_argument("--lambda", dest="lam", type=float, default=1.0)
    toda.add_argument("--tolerance", type=float, default=pipelines.TOLERANCES["discrete"])

    sg = vsub.add_parser("sg")
    sg.add_argument("--gamma", type=float, default=1.0)
    sg.add_argument("--k", type=float, default=1.0)
    sg.add_argument("--dt", type=float, default=1e-3)
    sg.add_argument("--steps", type=int, default=1000)
    sg.add_argument("--sites", type=int, default=64)
    sg.add_argument("--coefficients", type=_floats, default=list(pipelines.SG_COEFFICIENTS))
    sg.add_argument("--tolerance", type=float, default=pipelines.TOLERANCES["solver"])

    nls = vsub.add_parser("nls")
    nls.add_argument("--as-printed", action="store_true", help="use the originally published dt matrix")
    nls.add_argument("--spacings", type=_floats, default=list(pipelines.NLS_SPACINGS))
    nls.add_argument("--no-solver", action="store_true", help="skip the split-step solver check")
    nls.add_argument("--tolerance", type=float, default=pipelines.TOLERANCES["analytic"])

    for p in (toda, sg, nls):
        p.add_argument("--field", type=Path, help="check this field file instead of generating one")
        p.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
        p.add_argument("--dump", type=Path, help="directory for CSV dumps of field and residual")
    for p in (toda, sg):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--scan-params", type=_floats, default=list(pipelines.SPECTRAL_SCAN))

    simulate = sub.add_parser("simulate", help="run a solver and write the field file")
    ssub = simulate.add_subparsers(dest="example", required=True)
    s_nls = ssub.add_parser("nls")
    s_nls.add_argument("--profile", choices=["soliton", "zero"], default="soliton")
    s_nls.add_argument("--dt", type=float, default=1e-3)
    s_nls.add_argument("--steps", type=int, default=1000)
    s_nls.add_argument("--h", type=float, default=0.05)
    s_nls.add_argument("--method", choices=list(sim.NLS_METHODS), default="spectral")
    s_sg = ssub.add_parser("sg")
    s_sg.add_argument("--gamma", type=float, default=1.0)
    s_sg.add_argument("--dt", type=float, default=1e-3)
    s_sg.add_argument("--steps", type=int, default=1000)
    s_sg.add_argument("--sites", type=int, default=64)
    s_sg.add_argument("--coefficient", type=float, default=lax.SG_COEFFICIENT)
    s_sg.add_argument("--seed", type=int, default=0)
    s_toda = ssub.add_parser("toda")
    s_toda.add_argument("--rows", choices=["random", "zero"], default="random", help="seed rows")
    s_toda.add_argument("--size", type=_size, default=(64, 64))
    s_toda.add_argument("--seed", type=int, default=0)
    for p in (s_nls, s_sg, s_toda):
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--csv", type=Path, help="also write a CSV dump")

    dump = sub.add_parser("dump", help="convert a field file to CSV")
    dump.add_argument("field", type=Path)
    dump.add_argument("--csv", type=Path, required=True)
    return parser


# ---------------------------------------------------------------- commands


def _load(path: Path | None):
    return None if path is None else fieldio.read_field(path)


def cmd_identities(args) -> dict:
    return pipelines.identities_pipeline(args.seed, args.sizes, args.trials, args.tolerance)


def cmd_verify(args) -> dict:
    field = _load(args.field)
    if args.example == "toda":
        report = pipelines.toda_pipeline(args.size, args.lam, args.scan_params, args.seed, args.tolerance, q=field)
    elif args.example == "sg":
        report = pipelines.sg_pipeline(
            args.gamma, args.k, args.dt, args.steps, args.sites, args.scan_params, args.coefficients,
            args.seed, args.tolerance, theta=field,
        )
    else:
        report = pipelines.nls_pipeline(
            args.as_printed, args.spacings, args.tolerance, solver=not args.no_solver, u=field
        )
    if args.dump is not None:
        _dump_verify(args, field)
    return report


def _dump_verify(args, field) -> None:
    """CSV dumps of the checked field and its curvature residual."""
    out = Path(args.dump)
    out.mkdir(parents=True, exist_ok=True)
    if args.example == "toda":
        if field is None:
            rows, sites = args.size
            field = sim.toda_evolve(*pipelines.toda_seed_rows(sites, args.seed), steps=rows - 2)
        f = field
        ex = lax.LaxExample.toda(f.exp(), args.lam)
    elif args.example == "sg":
        cfg = sim.SolverConfig(dt=args.dt, steps=args.steps, boundary="prescribed-edge")
        f = field if field is not None else sim.sg_integrate(pipelines.sg_initial(args.sites, args.seed), args.gamma, cfg)
        ex = lax.LaxExample.sine_gordon(f, args.gamma, args.k)
    else:
        f = field if field is not None else pipelines.nls_soliton_grid(pipelines.NLS_SPACINGS[-1])
        ex = lax.LaxExample.nls(f)
    fieldio.write_csv(f, out / "field.csv")
    fieldio.write_csv(lax.residual_field(ex, getattr(args, "as_printed", False)), out / "residual.csv")


def cmd_simulate(args) -> dict:
    if args.example == "nls":
        cfg = sim.SolverConfig(dt=args.dt, steps=args.steps, h=args.h, method=args.method)
        x = sim.periodic_grid(cfg)
        u0 = sim.nls_soliton(x, 0.0) if args.profile == "soliton" else np.zeros_like(x, dtype=complex)
        f = sim.nls_solve(u0, cfg)
    elif args.example == "sg":
        cfg = sim.SolverConfig(dt=args.dt, steps=args.steps, boundary="prescribed-edge")
        f = sim.sg_integrate(pipelines.sg_initial(args.sites, args.seed), args.gamma, cfg, coefficient=args.coefficient)
    else:
        rows, sites = args.size
        if args.rows == "zero":
            seeds = (np.zeros(sites), np.zeros(sites))
        else:
            seeds = pipelines.toda_seed_rows(sites, args.seed)
        f = sim.toda_evolve(*seeds, steps=rows - 2)
    fieldio.write_field(f, args.out)
    if args.csv is not None:
        fieldio.write_csv(f, args.csv)
    v = f.values()
    return {
        "example": args.example,
        "file": str(args.out),
        "grid": f.domain.describe(),
        "min_abs": float(np.min(np.abs(v))),
        "max_abs": float(np.max(np.abs(v))),
        "mean": [float(np.mean(v.real)), float(np.mean(v.imag))],
    }


def cmd_dump(args) -> dict:
    f = fieldio.read_field(args.field)
    fieldio.write_csv(f, args.csv)
    return {"file": str(args.csv), "grid": f.domain.describe()}


# ------------------------------------------------------------------ output


def load_schema() -> dict:
    return json.loads(resources.files("curvkit").joinpath("report_schema.json").read_text())


def finalize_report(body: dict, argv: list[str], wall_time: float) -> dict:
    report = dict(body)
    report.update(
        {
            "schema_version": SCHEMA_VERSION,
            "version": __version__,
            "command": list(argv),
            "wall_time": round(wall_time, 6),
        }
    )
    jsonschema.validate(report, load_schema())
    return report


def render(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        if args.command == "identities":
            body = cmd_identities(args)
        elif args.command == "verify":
            body = cmd_verify(args)
        elif args.command == "simulate":
            _emit(json.dumps(cmd_simulate(args), indent=2, sort_keys=True) + "\n", None)
            return EXIT_PASS
        else:
            _emit(json.dumps(cmd_dump(args), indent=2, sort_keys=True) + "\n", None)
            return EXIT_PASS
        report = finalize_report(body, argv, time.perf_counter() - start)
    except NumericalError as err:
        step = "" if err.step is None else f" (step {err.step})"
        sys.stderr.write(f"curvkit: numerical failure{step}: {err}\n")
        return EXIT_NUMERICAL
    except (CurvkitError, OSError, ValueError) as err:
        sys.stderr.write(f"curvkit: error: {err}\n")
        return EXIT_CONFIG
    _emit(render(report), getattr(args, "out", None))
    return EXIT_PASS if report["pass"] else EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
