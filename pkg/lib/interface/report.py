"""
Per-system classification report: integrate, locate fixed points, compute W, count
phi_t crossings, build the return map and Gamma, and collect Darboux and mesh
diagnostics into one JSON document.
"""
import json
import os
from typing import Mapping, Optional, Sequence

import jsonschema

from lib.catalog.systems import DEFAULT_DT, DEFAULT_T_END, DEFAULT_TRANSIENT, SystemDef
from lib.curvature.classify import classify_attractor
from lib.dynamics.fixed_points import find_fixed_points
from lib.dynamics.integrate import integrate
from lib.dynamics.wrapping import audit_wrapping
from lib.errors import NumericalFailure
from lib.interface.console import log
from lib.section.poincare import SectionSpec
from lib.surface.mesh import MeshJob, extract, flag_singularities

SCHEMA_VERSION = 1
SCHEMA_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "..", "schema",
                           "classify_report.schema.json")
DEFAULT_MESH_RESOLUTION = 48
MESH_MARGIN = 0.2


class RunSettings:
    """Every knob that influences a report; printed into the report itself."""

    def __init__(self, t_end: float = DEFAULT_T_END, dt: float = DEFAULT_DT,
                 transient: float = DEFAULT_TRANSIENT, ic: Optional[Sequence[float]] = None,
                 method: str = "RK45", section: Optional[str] = None,
                 mesh_resolution: int = DEFAULT_MESH_RESOLUTION, mesh_field: str = "phi_t",
                 darboux_points: int = 200, seed: int = 0):
        self.t_end = float(t_end)
        self.dt = float(dt)
        self.transient = float(transient)
        self.ic = None if ic is None else [float(v) for v in ic]
        self.method = method
        self.section = section
        self.mesh_resolution = int(mesh_resolution)
        self.mesh_field = mesh_field
        self.darboux_points = int(darboux_points)
        self.seed = int(seed)

    def to_dict(self) -> dict:
        return {
            "t_end": {"value": self.t_end, "unit": "time"},
            "dt": {"value": self.dt, "unit": "time"},
            "transient": {"value": self.transient, "unit": "time"},
            "ic": {"value": self.ic, "unit": "state"},
            "method": self.method,
            "section": self.section,
            "mesh_resolution": self.mesh_resolution,
            "mesh_field": self.mesh_field,
            "darboux_points": self.darboux_points,
            "seed": self.seed,
        }

    def to_kwargs(self) -> dict:
        return {"t_end": self.t_end, "dt": self.dt, "transient": self.transient, "ic": self.ic,
                "method": self.method, "section": self.section, "mesh_resolution": self.mesh_resolution,
                "mesh_field": self.mesh_field, "darboux_points": self.darboux_points, "seed": self.seed}

    def __repr__(self):
        return f"RunSettings({self.to_kwargs()})"


def classify_params(system: SystemDef, overrides: Optional[Mapping[str, float]] = None,
                    preset: Optional[str] = None):
    """Parameters for a verdict run: the system's verdict parameters unless the caller chose some."""
    if overrides or preset:
        return system.bind(overrides, preset), "explicit"
    if system.verdict_params:
        return system.bind(system.verdict_params), "verdict"
    return system.bind(), "default"


def mesh_summary(mesh) -> dict:
    summary = mesh.summary()
    return {
        "field": mesh.job.field if mesh.job is not None else None,
        "resolution": mesh.job.resolution if mesh.job is not None else None,
        "bounds": {"value": mesh.job.bounds.tolist() if mesh.job is not None else None, "unit": "state"},
        "vertices": summary["vertices"],
        "triangles": summary["triangles"],
        "flagged_vertices": summary["flagged_vertices"],
        "fold_vertices": summary["fold_vertices"],
        "factor_sheet_vertices": summary["factor_sheet_vertices"],
        "component_count": len(summary["components"]),
        "spurious_candidates": [c for c in summary["components"] if c["spurious_candidate"]],
        "interpretation": ("components dominated by vanishing-gradient vertices, by folds of the z = Psi(x, y) "
                           "solve or by sheets of a velocity component dividing the field"),
    }


def build_classify_report(name: str, f, params: Mapping[str, float], settings: RunSettings,
                          system: Optional[SystemDef] = None, params_source: str = "explicit",
                          traj=None, result=None, mesh=None) -> dict:
    """
    Run the full per-system pipeline. Raises NumericalFailure when the trajectory
    diverges or no fixed point is found. A trajectory, classification or mesh already
    computed for these settings is reused instead of being recomputed.
    """
    ic = settings.ic if settings.ic is not None else (
        system.initial_condition(params).tolist() if system is not None else [0.1, 0.1, 0.1])
    if traj is None:
        traj = integrate(f, params, ic, settings.t_end, settings.dt, settings.transient, settings.method)
    if traj.diverged:
        raise NumericalFailure(f"{name}: trajectory diverged ({traj.message})")

    fps = result.fixed_points if result is not None else find_fixed_points(f, params, seed=settings.seed)
    if not fps:
        raise NumericalFailure(f"{name}: no fixed points found in the search box")

    if result is None:
        section = SectionSpec.parse(settings.section) if settings.section else None
        result = classify_attractor(f, params, traj, fps, section=section,
                                    section_hint=system.section_hint if system is not None else None,
                                    darboux_points=settings.darboux_points, seed=settings.seed, name=name)
    audit = audit_wrapping(result.wrapping, system.reference_w if system is not None else None, fps, name)

    if mesh is None and settings.mesh_resolution > 0:
        job = MeshJob(settings.mesh_field, traj.bounds(margin=MESH_MARGIN), settings.mesh_resolution)
        mesh = flag_singularities(extract(f, params, job), f, params)

    resolved = settings.to_dict()
    resolved["ic"]["value"] = [float(v) for v in ic]
    resolved["section"] = str(result.section) if result.section is not None else None

    report = {
        "schema_version": SCHEMA_VERSION,
        "system": {
            "name": name,
            "title": system.title if system is not None else name,
            "source": "catalog" if system is not None else "file",
            "params": {k: {"value": float(v), "unit": "dimensionless"} for k, v in params.items()},
            "params_source": params_source,
            "field": [str(e) for e in f.exprs],
        },
        "settings": resolved,
        "trajectory": {
            "samples": len(traj),
            "t_start": {"value": float(traj.t[0]), "unit": "time"},
            "t_stop": {"value": float(traj.t[-1]), "unit": "time"},
            "bounds": {"value": traj.bounds().tolist(), "unit": "state"},
        },
        "fixed_points": [p.to_dict() for p in fps],
        "fixed_point_count": {
            "found": len(fps),
            "expected": system.fixed_point_count_expected if system is not None else None,
        },
        "wrapping": dict(result.wrapping.to_dict(), audit=audit),
        "expected_verdict": system.expected_verdict if system is not None else None,
        "diagnostics": {
            "darboux": result.darboux.summary() if result.darboux is not None else None,
            "mesh": mesh_summary(mesh) if mesh is not None else None,
            "expects_spurious_mesh": system.expects_spurious_mesh if system is not None else False,
        },
        "notes": list(system.notes) if system is not None else [],
    }
    report.update(result.to_dict())
    log("Report", f"{name}: verdict {result.verdict}, W={result.wrapping.w}, "
                  f"m={result.return_map.branch_count if result.return_map is not None else None}")
    return report


def load_schema(path: str = SCHEMA_PATH) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def validate_report(report: dict, schema: Optional[dict] = None) -> list:
    """Schema violations as 'path: message' strings; empty when the report is valid."""
    validator = jsonschema.Draft7Validator(schema or load_schema())
    errors = sorted(validator.iter_errors(report), key=lambda e: [str(p) for p in e.absolute_path])
    return ["/".join(str(p) for p in e.absolute_path) + ": " + e.message for e in errors]
