import argparse
import os

from lib.catalog.systems import DEFAULT_DT, DEFAULT_T_END, DEFAULT_TRANSIENT, get_system, list_systems
from lib.curvature.classify import classify_attractor
from lib.curvature.phi import FIELDS, phi_along
from lib.dynamics.integrate import integrate
from lib.interface.console import progress
from lib.interface.io import write_curvature_csv, write_json, write_pairs_csv, write_section_csv
from lib.interface.report import MESH_MARGIN, RunSettings, build_classify_report, classify_params
from lib.section.poincare import section_crossings
from lib.surface.mesh import MeshJob, extract, flag_singularities


# -------------------------------
# ARG PARSER
# -------------------------------
def parse_args():
    parser = argparse.ArgumentParser(description="Export every artifact of one or all catalog systems")
    parser.add_argument("--system", help="catalog system name (default: all listed systems)")
    parser.add_argument("--output_path", default="output", help="Directory for the exported files")
    parser.add_argument("--t_end", type=float, default=DEFAULT_T_END)
    parser.add_argument("--dt", type=float, default=DEFAULT_DT)
    parser.add_argument("--transient", type=float, default=DEFAULT_TRANSIENT)
    parser.add_argument("--mesh_res", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    return parser.parse_args()


def export_system(name, settings, base_dir):
    """Trajectory, curvature, section, return map, Gamma, meshes and the report of one system."""
    system = get_system(name)
    params, source = classify_params(system)
    out_dir = os.path.join(base_dir, name)
    os.makedirs(out_dir, exist_ok=True)

    traj = integrate(system.field, params, system.initial_condition(params), settings.t_end, settings.dt,
                     settings.transient)
    if traj.diverged:
        print(f"[WARNING] {name}: trajectory diverged, skipping")
        return None
    traj.to_csv(os.path.join(out_dir, "trajectory.csv"))
    write_curvature_csv(os.path.join(out_dir, "curvature.csv"), traj, phi_along(system.field, params, traj))

    result = classify_attractor(system.field, params, traj, section_hint=system.section_hint,
                                darboux_points=settings.darboux_points, seed=settings.seed, name=name)
    points = section_crossings(traj, result.section, system.field, params)
    write_section_csv(os.path.join(out_dir, "section.csv"), points)
    write_pairs_csv(os.path.join(out_dir, "pairs.csv"), result.return_map)
    if result.gamma is not None:
        write_json(os.path.join(out_dir, "gamma.json"), result.gamma.to_dict())

    meshes = {}
    for field in FIELDS:
        job = MeshJob(field, traj.bounds(margin=MESH_MARGIN), settings.mesh_resolution)
        mesh = flag_singularities(extract(system.field, params, job), system.field, params)
        mesh.export_obj(os.path.join(out_dir, f"{field}.obj"))
        mesh.export_flags(os.path.join(out_dir, f"{field}_flags.csv"))
        meshes[field] = mesh

    report = build_classify_report(name, system.field, params, settings, system, source, traj=traj, result=result,
                                   mesh=meshes.get(settings.mesh_field))
    write_json(os.path.join(out_dir, "report.json"), report)
    return report


# -------------------------------
# MAIN
# -------------------------------
def main():
    args = parse_args()
    settings = RunSettings(t_end=args.t_end, dt=args.dt, transient=args.transient,
                           mesh_resolution=args.mesh_res, seed=args.seed)
    names = [args.system] if args.system else [s.name for s in list_systems()]
    os.makedirs(args.output_path, exist_ok=True)

    summary = {}
    for name in progress(names, desc="systems"):
        report = export_system(name, settings, args.output_path)
        if report is not None:
            summary[name] = {"verdict": report["verdict"], "expected": report["expected_verdict"],
                             "w": report["wrapping"]["w"]["value"],
                             "m": report["return_map"]["m"] if report["return_map"] else None}
    write_json(os.path.join(args.output_path, "summary.json"), summary)
    print(f"[PIPELINE] {len(summary)} system(s) exported to {args.output_path}")


if __name__ == "__main__":
    main()
