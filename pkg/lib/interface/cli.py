"""
flowcurv command line.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure (divergence,
no fixed points). Machine-readable output goes to stdout, messages to stderr.
"""
import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Dict, List, Optional

import numpy as np
from dotenv import load_dotenv

from lib.catalog.systems import DEFAULT_DT, DEFAULT_T_END, DEFAULT_TRANSIENT, get_system, list_systems
from lib.curvature.crossings import counted, crossings
from lib.curvature.phi import FIELDS, phi_along
from lib.dynamics.fixed_points import find_fixed_points
from lib.dynamics.integrate import METHODS, Trajectory, integrate
from lib.dynamics.wrapping import audit_wrapping, wrapping_number
from lib.errors import FlowCurvError, NumericalFailure, UsageError
from lib.field.parser import load_field_file
from lib.interface import console
from lib.interface.console import error, log, progress
from lib.interface.io import (dump_json, read_section_csv, write_curvature_csv, write_json, write_pairs_csv,
                              write_section_csv)
from lib.interface.report import (DEFAULT_MESH_RESOLUTION, MESH_MARGIN, RunSettings, build_classify_report,
                                  classify_params, validate_report)
from lib.section.poincare import SectionSpec, default_section, section_crossings
from lib.section.return_map import R_MIN, SMOOTHING_WINDOW, build_return_map, transition_matrix
from lib.surface.mesh import MeshJob, extract, flag_singularities

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
JOBS_ENV = "FLOWCURV_JOBS"


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -------------------------------
# ARGUMENT HELPERS
# -------------------------------
def parse_params(items: Optional[List[str]]) -> Dict[str, float]:
    params = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--param expects NAME=VALUE, got {item!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--param {key.strip()}: {value!r} is not a number") from None
    return params


def parse_vector(text: str, count: int, option: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{option} expects {count} comma-separated numbers, got {text!r}") from None
    if len(values) != count:
        raise UsageError(f"{option} expects {count} comma-separated numbers, got {text!r}")
    return values


def resolve_system(args):
    """(name, field, bound params, SystemDef or None) from --system/--system-file, --param and --preset."""
    overrides = parse_params(args.param)
    if args.system_file:
        if args.system:
            raise UsageError("use either --system or --system-file, not both")
        if args.preset:
            raise UsageError("--preset only applies to catalog systems")
        f = load_field_file(args.system_file)
        name = os.path.splitext(os.path.basename(args.system_file))[0]
        return name, f, f.bind(overrides), None
    if not args.system:
        raise UsageError("--system NAME or --system-file PATH is required")
    system = get_system(args.system)
    return system.name, system.field, system.bind(overrides, args.preset), system


def load_or_integrate(args, f, params, system) -> Trajectory:
    if getattr(args, "traj", None):
        return Trajectory.from_csv(args.traj)
    if args.ic:
        ic = parse_vector(args.ic, 3, "--ic")
    elif system is not None:
        ic = system.initial_condition(params)
    else:
        ic = [0.1, 0.1, 0.1]
    traj = integrate(f, params, ic, args.t_end, args.dt, args.transient, args.method)
    if traj.diverged:
        raise NumericalFailure(f"trajectory diverged ({traj.message})")
    return traj


def emit(text: str):
    sys.stdout.write(text)
    sys.stdout.flush()


def emit_json(data, out: Optional[str] = None):
    if out:
        write_json(out, data)
    else:
        emit(dump_json(data))


# -------------------------------
# SUBCOMMANDS
# -------------------------------
def cmd_systems(args) -> int:
    if args.action == "show":
        if not args.name:
            raise UsageError("systems show needs a system name")
        info = get_system(args.name).describe()
        if args.json:
            emit_json(info)
        else:
            for key, value in info.items():
                emit(f"{key}: {value}\n")
        return EXIT_OK

    systems = list_systems(include_hidden=args.all)
    if args.json:
        emit_json([s.summary() for s in systems])
        return EXIT_OK
    for s in systems:
        defaults = ", ".join(f"{k}={v:g}" for k, v in s.defaults.items())
        emit(f"{s.name:<18} {s.title:<28} {s.family:<9} fixed points {s.fixed_point_count_expected}  {defaults}\n")
    return EXIT_OK


def cmd_integrate(args) -> int:
    name, f, params, system = resolve_system(args)
    traj = load_or_integrate(args, f, params, system)
    traj.to_csv(args.out)
    log("Integrate", f"{name}: wrote {len(traj)} samples to {args.out}")
    return EXIT_OK


def _fixed_points(args, f, params, name):
    fps = find_fixed_points(f, params, seed=args.seed)
    if not fps:
        raise NumericalFailure(f"{name}: no fixed points found in the search box")
    return fps


def cmd_fixed_points(args) -> int:
    name, f, params, system = resolve_system(args)
    fps = _fixed_points(args, f, params, name)
    if args.json:
        emit_json({"system": name, "params": params, "fixed_points": [p.to_dict() for p in fps]})
        return EXIT_OK
    for p in fps:
        eigs = ", ".join(f"{l.real:.6g}{l.imag:+.6g}j" for l in p.eigenvalues)
        loc = ", ".join(f"{v:.9g}" for v in p.location)
        emit(f"{p.role:<6} ({loc})  {p.kind}  [{eigs}]\n")
    return EXIT_OK


def cmd_wrap_number(args) -> int:
    name, f, params, system = resolve_system(args)
    fps = _fixed_points(args, f, params, name)
    report = wrapping_number(fps)
    audit = audit_wrapping(report, system.reference_w if system is not None else None, fps, name)
    if args.json:
        emit_json(dict(report.to_dict(), system=name, audit=audit))
    elif report.defined and report.omega is None:
        emit(f"W = {report.w:.6g}  ({report.reason}, D={report.distance:.6g})\n")
    elif report.defined:
        emit(f"W = {report.w:.6g}  (omega={report.omega:.6g}, lambda3={report.lambda3:.6g}, "
             f"D={report.distance:.6g})\n")
    else:
        emit(f"W undefined: {report.reason}\n")
    return EXIT_OK


def cmd_curvature(args) -> int:
    name, f, params, system = resolve_system(args)
    traj = load_or_integrate(args, f, params, system)
    write_curvature_csv(args.out, traj, phi_along(f, params, traj))
    log("Curvature", f"{name}: wrote {len(traj)} rows to {args.out}")
    return EXIT_OK


def cmd_crossings(args) -> int:
    name, f, params, system = resolve_system(args)
    traj = load_or_integrate(args, f, params, system)
    fps = find_fixed_points(f, params, seed=args.seed)
    events = crossings(f, params, traj, args.which, fixed_points=fps, min_depth=args.min_depth)
    if args.json:
        emit_json({"system": name, "which": args.which, "count": len(counted(events)),
                   "events": [e.to_dict() for e in events]})
        return EXIT_OK
    for e in events:
        flags = "".join(f" {label}" for label, on in (("tangency", e.tangency), ("near-fixed-point", e.near_fixed_point),
                                                       ("shallow", e.shallow)) if on)
        emit(f"t={e.t:.9g} {e.direction_label}{flags}\n")
    emit(f"{len(counted(events))} counted {args.which} crossing(s)\n")
    return EXIT_OK


def cmd_poincare(args) -> int:
    name, f, params, system = resolve_system(args)
    traj = load_or_integrate(args, f, params, system)
    if args.plane:
        try:
            spec = SectionSpec.parse(args.plane)
        except ValueError as e:
            raise UsageError(f"--plane: {e}") from None
    else:
        fps = find_fixed_points(f, params, seed=args.seed)
        spec = default_section(traj, fps, system.section_hint if system is not None else None)
    points = section_crossings(traj, spec, f, params)
    write_section_csv(args.out, points)
    log("Section", f"{name}: {len(points)} crossing(s) of {spec} written to {args.out}")
    return EXIT_OK


def cmd_return_map(args) -> int:
    rho = read_section_csv(args.input)
    rmap = build_return_map(rho, r_min=args.r_min, window=args.window)
    if args.out:
        write_pairs_csv(args.out, rmap)
    if args.gamma:
        if not rmap.partitioned:
            raise NumericalFailure(f"cannot build Gamma: {rmap.warning}")
        write_json(args.gamma, transition_matrix(rmap).to_dict())
    if args.json:
        emit_json(rmap.to_dict())
    else:
        emit(f"m = {rmap.branch_count}  critical points: {rmap.critical_points}\n")
    return EXIT_OK


def cmd_surface(args) -> int:
    name, f, params, system = resolve_system(args)
    if args.bounds == "auto":
        bounds = load_or_integrate(args, f, params, system).bounds(margin=MESH_MARGIN)
    else:
        bounds = np.array(parse_vector(args.bounds, 6, "--bounds")).reshape(3, 2)
    try:
        job = MeshJob(args.field, bounds, args.res, args.iso)
    except ValueError as e:
        raise UsageError(str(e)) from None
    mesh = flag_singularities(extract(f, params, job), f, params)
    mesh.export_obj(args.out)
    if args.flags:
        mesh.export_flags(args.flags)
    summary = mesh.summary()
    log("Surface", f"{name}: {summary['vertices']} vertices, {summary['spurious_candidates']} spurious "
                   f"candidate component(s), mesh written to {args.out}")
    if args.json:
        emit_json(summary)
    return EXIT_OK


def _settings(args) -> RunSettings:
    return RunSettings(t_end=args.t_end, dt=args.dt, transient=args.transient,
                       ic=parse_vector(args.ic, 3, "--ic") if args.ic else None, method=args.method,
                       section=args.plane, mesh_resolution=args.mesh_res, darboux_points=args.darboux_points,
                       seed=args.seed)


def _classify_catalog_system(name: str, settings_kwargs: dict, verbose: bool):
    """Worker for classify --all; returns (status, name, report or message)."""
    console.set_verbose(verbose)
    try:
        system = get_system(name)
        params, source = classify_params(system)
        report = build_classify_report(name, system.field, params, RunSettings(**settings_kwargs), system, source)
        return "ok", name, report
    except NumericalFailure as e:
        return "numerical", name, str(e)
    except (FlowCurvError, ValueError) as e:
        return "error", name, str(e)


def _summary_line(report: dict) -> str:
    w = report["wrapping"]["w"]["value"]
    reference = report["wrapping"]["audit"]["reference"]
    w_text = f"{w:.4g}" if w is not None else "undefined"
    if reference is not None:
        w_text += f" (ref {reference:g})"
    spurious = report["diagnostics"]["mesh"]["spurious_candidates"] if report["diagnostics"]["mesh"] else []
    m = report["return_map"]["m"] if report["return_map"] else None
    return (f"{report['system']['name']:<18} {report['verdict']:<9} expected {str(report['expected_verdict']):<9} "
            f"W={w_text:<16} crossings={report['phi_t_crossings']['count']:<5} m={m} "
            f"spurious={len(spurious)}\n")


def _check(reports, validate: bool) -> int:
    if not validate:
        return EXIT_OK
    status = EXIT_OK
    for report in reports:
        for problem in validate_report(report):
            error(f"{report['system']['name']}: schema violation at {problem}")
            status = EXIT_USAGE
    return status


def cmd_classify(args) -> int:
    settings = _settings(args)
    if args.all:
        if args.system or args.system_file:
            raise UsageError("--all cannot be combined with --system or --system-file")
        return _classify_all(args, settings)

    name, f, params, system = resolve_system(args)
    source = "explicit"
    if system is not None and not args.param and not args.preset:
        params, source = classify_params(system)
    report = build_classify_report(name, f, params, settings, system, source)
    status = _check([report], args.validate)
    if args.json or args.out:
        emit_json(report, args.out)
    if not args.json:
        emit(_summary_line(report))
    return status


def _jobs(args) -> int:
    load_dotenv()
    value = args.jobs if args.jobs is not None else os.getenv(JOBS_ENV, "1")
    try:
        jobs = int(value)
    except ValueError:
        raise UsageError(f"{JOBS_ENV} must be an integer, got {value!r}") from None
    if jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {jobs}")
    return jobs


def _classify_all(args, settings: RunSettings) -> int:
    names = [s.name for s in list_systems()]
    jobs = _jobs(args)
    kwargs = settings.to_kwargs()
    results = {}
    if jobs == 1:
        for name in progress(names, desc="classify"):
            results[name] = _classify_catalog_system(name, kwargs, console.VERBOSE)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_classify_catalog_system, name, kwargs, console.VERBOSE) for name in names]
            for future in progress(as_completed(futures), desc="classify", total=len(futures)):
                status, name, payload = future.result()
                results[name] = (status, name, payload)

    # catalog order, whatever the completion order
    reports = [results[n][2] for n in names if results[n][0] == "ok"]
    failures = [{"name": n, "status": results[n][0], "error": results[n][2]} for n in names if results[n][0] != "ok"]
    for failure in failures:
        error(f"{failure['name']}: {failure['error']}")

    status = _check(reports, args.validate)
    if args.json or args.out:
        emit_json({"schema_version": 1, "settings": settings.to_dict(), "reports": reports,
                   "failures": failures}, args.out)
    if not args.json:
        emit("".join(_summary_line(r) for r in reports))
    if any(f["status"] == "numerical" for f in failures):
        return EXIT_NUMERICAL
    if failures:
        return EXIT_USAGE
    return status


# -------------------------------
# ARG PARSER
# -------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="only print warnings and errors")
    common.add_argument("--seed", type=int, default=0, help="seed for the fixed-point search jitter")

    system_opts = _ArgumentParser(add_help=False)
    system_opts.add_argument("--system", help="catalog system name")
    system_opts.add_argument("--system-file", help="custom system file (dx = ..., dy = ..., dz = ...)")
    system_opts.add_argument("--param", action="append", metavar="NAME=VALUE", help="parameter override")
    system_opts.add_argument("--preset", help="named parameter preset of a catalog system")

    run_opts = _ArgumentParser(add_help=False)
    run_opts.add_argument("--ic", help="initial condition X,Y,Z")
    run_opts.add_argument("--t-end", type=float, default=DEFAULT_T_END)
    run_opts.add_argument("--dt", type=float, default=DEFAULT_DT)
    run_opts.add_argument("--transient", type=float, default=DEFAULT_TRANSIENT)
    run_opts.add_argument("--method", choices=METHODS, default="RK45")

    traj_opts = _ArgumentParser(add_help=False)
    traj_opts.add_argument("--traj", help="trajectory CSV (t,x,y,z) instead of integrating")

    parser = _ArgumentParser(prog="flowcurv", description="Flow curvature manifolds of 3D polynomial flows")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("systems", parents=[common], help="list or show catalog systems")
    p.add_argument("action", choices=["list", "show"])
    p.add_argument("name", nargs="?")
    p.add_argument("--json", action="store_true")
    p.add_argument("--all", action="store_true", help="include auxiliary entries")
    p.set_defaults(handler=cmd_systems)

    p = sub.add_parser("integrate", parents=[common, system_opts, run_opts], help="integrate to a CSV trajectory")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_integrate)

    p = sub.add_parser("fixed-points", parents=[common, system_opts], help="fixed points and their spectra")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_fixed_points)

    p = sub.add_parser("wrap-number", parents=[common, system_opts], help="wrapping number W")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_wrap_number)

    p = sub.add_parser("curvature", parents=[common, system_opts, run_opts, traj_opts],
                       help="phi, phi_c, phi_t along a trajectory")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_curvature)

    p = sub.add_parser("crossings", parents=[common, system_opts, run_opts, traj_opts],
                       help="zero crossings of phi, phi_c, phi_t or phi_t_core")
    p.add_argument("--which", choices=FIELDS, default="phi_t")
    p.add_argument("--min-depth", type=float, default=0.0, help="ignore shallower excursions (|phi_t_unit|)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_crossings)

    p = sub.add_parser("poincare", parents=[common, system_opts, run_opts, traj_opts], help="Poincaré section")
    p.add_argument("--plane", help='"p=PX,PY,PZ;n=NX,NY,NZ;dir=-" with optional ";u=UX,UY,UZ"')
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_poincare)

    p = sub.add_parser("return-map", parents=[common], help="first-return map and transition matrix")
    p.add_argument("--in", dest="input", required=True, help="section CSV (t,x,y,z,rho)")
    p.add_argument("--out", help="pairs CSV")
    p.add_argument("--gamma", help="transition matrix JSON")
    p.add_argument("--r-min", type=int, default=R_MIN)
    p.add_argument("--window", type=int, default=SMOOTHING_WINDOW)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_return_map)

    p = sub.add_parser("surface", parents=[common, system_opts, run_opts, traj_opts], help="mesh a curvature surface")
    p.add_argument("--field", choices=FIELDS, default="phi_t")
    p.add_argument("--bounds", default="auto", help="auto or x0,x1,y0,y1,z0,z1")
    p.add_argument("--res", type=int, default=64)
    p.add_argument("--iso", type=float, default=0.0)
    p.add_argument("--out", required=True, help="OBJ file")
    p.add_argument("--flags", help="per-vertex flags CSV")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_surface)

    p = sub.add_parser("classify", parents=[common, system_opts, run_opts], help="full verdict report")
    p.add_argument("--all", action="store_true", help="every listed catalog system")
    p.add_argument("--jobs", type=int, help=f"parallel systems for --all (default ${JOBS_ENV} or 1)")
    p.add_argument("--plane", help="section override, same format as poincare --plane")
    p.add_argument("--mesh-res", type=int, default=DEFAULT_MESH_RESOLUTION, help="0 disables the mesh check")
    p.add_argument("--darboux-points", type=int, default=200)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--validate", action="store_true", help="check the report against the shipped schema")
    p.set_defaults(handler=cmd_classify)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        error(str(e))
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    console.set_verbose(not args.quiet)
    try:
        return args.handler(args)
    except NumericalFailure as e:
        error(str(e))
        return EXIT_NUMERICAL
    except (FlowCurvError, ValueError) as e:
        error(str(e))
        return EXIT_USAGE
    except OSError as e:
        error(f"cannot write output: {e}")
        return EXIT_USAGE


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
