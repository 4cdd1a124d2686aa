"""
Triangle meshes of phi = 0, phi_c = 0, phi_t = 0 or phi_t_core = 0 over a box.

Marching cubes (PyMCubes) runs on the sampled grid; vertices are then moved onto the
surface with a few gradient Newton steps. Vertices where the gradient collapses, fold
vertices and velocity-factor sheets are flagged together with the mesh components they
dominate.
"""
import os
import tempfile
from typing import Mapping, Optional

import mcubes
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from lib.curvature.phi import FIELDS, bind_phi
from lib.field.derivatives import time_derivatives_batch
from lib.interface.console import log, warn

MIN_RESOLUTION = 8
POLISH_STEPS = 5
POLISH_MIN_GRADIENT = 1e-8
SINGULAR_RATIO = 0.05
FOLD_RATIO = 0.05
FACTOR_DISTANCE = 0.01
SPURIOUS_FRACTION = 0.5


class MeshJob:
    def __init__(self, field: str, bounds, resolution: int = 64, iso: float = 0.0):
        if field not in FIELDS:
            raise ValueError(f"unknown field '{field}' (use one of {', '.join(FIELDS)})")
        bounds = np.asarray(bounds, dtype=float).reshape(3, 2)
        if np.any(bounds[:, 1] <= bounds[:, 0]) or not np.all(np.isfinite(bounds)):
            raise ValueError(f"mesh bounds must be nondegenerate, got {bounds.tolist()}")
        if resolution < MIN_RESOLUTION:
            raise ValueError(f"mesh resolution must be >= {MIN_RESOLUTION}, got {resolution}")
        self.field = field
        self.bounds = bounds
        self.resolution = int(resolution)
        self.iso = float(iso)

    @property
    def cell(self) -> np.ndarray:
        return (self.bounds[:, 1] - self.bounds[:, 0]) / self.resolution

    def to_dict(self) -> dict:
        return {"field": self.field, "bounds": self.bounds.tolist(), "resolution": self.resolution,
                "iso": self.iso}

    def __repr__(self):
        return f"MeshJob({self.field}, res={self.resolution}, iso={self.iso})"


class Mesh:
    def __init__(self, vertices, triangles, job: Optional[MeshJob] = None):
        self.vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        self.job = job
        n = len(self.vertices)
        self.gradients = None
        self.grad_norm = np.zeros(n)
        self.residual = np.zeros(n)
        self.flags = np.zeros(n, dtype=bool)
        self.fold = np.zeros(n, dtype=bool)
        self.factor_sheet = np.zeros(n, dtype=bool)
        self.labels = np.zeros(n, dtype=int)
        self.components = []

    @property
    def empty(self) -> bool:
        return len(self.vertices) == 0

    @property
    def spurious_components(self):
        return [c for c in self.components if c["spurious_candidate"]]

    def edge_use_counts(self) -> np.ndarray:
        """How many triangles share each undirected edge."""
        if not len(self.triangles):
            return np.empty(0, dtype=int)
        t = self.triangles
        edges = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        return counts

    def summary(self) -> dict:
        return {
            "vertices": int(len(self.vertices)),
            "triangles": int(len(self.triangles)),
            "flagged_vertices": int(self.flags.sum()),
            "fold_vertices": int(self.fold.sum()),
            "factor_sheet_vertices": int(self.factor_sheet.sum()),
            "components": self.components,
            "spurious_candidates": len(self.spurious_components),
        }

    def export_obj(self, path: str):
        """OBJ with 1-based face indices, written to a temp file and renamed into place."""
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(suffix=".obj", dir=directory)
        os.close(fd)
        try:
            mcubes.export_obj(self.vertices, self.triangles, tmp)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.remove(tmp)

    def export_flags(self, path: str):
        from lib.interface.io import write_csv
        rows = np.column_stack([np.arange(len(self.vertices)), self.vertices, self.grad_norm,
                                self.flags.astype(int), self.labels, self.fold.astype(int),
                                self.factor_sheet.astype(int)])
        write_csv(path, ["vertex", "x", "y", "z", "grad_norm", "flagged", "component", "fold", "factor_sheet"],
                  rows, integer_columns=(0, 5, 6, 7, 8))

    def __repr__(self):
        return f"Mesh({len(self.vertices)} vertices, {len(self.triangles)} triangles)"


def _grid_values(evaluate, job: MeshJob) -> np.ndarray:
    n = job.resolution + 1
    axes = [np.linspace(lo, hi, n) for lo, hi in job.bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return evaluate(grid).reshape(n, n, n)


def polish(vertices: np.ndarray, value, gradient, iso: float, max_step: float, steps: int = POLISH_STEPS):
    """Gradient Newton steps toward value == iso, each step clamped to `max_step`."""
    v = vertices.copy()
    for _ in range(steps):
        g = gradient(v)
        r = value(v) - iso
        gg = np.einsum("ni,ni->n", g, g)
        ok = gg > POLISH_MIN_GRADIENT ** 2
        step = np.zeros_like(v)
        step[ok] = (r[ok] / gg[ok])[:, None] * g[ok]
        length = np.linalg.norm(step, axis=1)
        too_long = length > max_step
        step[too_long] *= (max_step / length[too_long])[:, None]
        v -= step
    return v


def extract_implicit(value, gradient, job: MeshJob) -> Mesh:
    """Mesh the level set value(X) == iso for vectorised `value` and `gradient` callables."""
    volume = _grid_values(value, job)
    if not (volume.min() <= job.iso <= volume.max()):
        warn(f"{job.field} = {job.iso:g} does not meet the box; empty mesh")
        return Mesh(np.empty((0, 3)), np.empty((0, 3)), job)

    vertices, triangles = mcubes.marching_cubes(volume, job.iso)
    world = job.bounds[:, 0] + np.asarray(vertices, dtype=float) * job.cell
    world = polish(world, value, gradient, job.iso, float(np.linalg.norm(job.cell)))

    mesh = Mesh(world, triangles, job)
    if not mesh.empty:
        mesh.gradients = gradient(mesh.vertices)
        mesh.grad_norm = np.linalg.norm(mesh.gradients, axis=1)
        mesh.residual = np.abs(value(mesh.vertices) - job.iso)
    log("Surface", f"{job.field}: {len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles")
    return mesh


def extract(f, params: Mapping[str, float], job: MeshJob) -> Mesh:
    bound_phi = bind_phi(f, params)
    return extract_implicit(lambda p: bound_phi.value(job.field, p),
                            lambda p: bound_phi.gradient(job.field, p), job)


def label_components(mesh: Mesh, split=None) -> np.ndarray:
    """Connected components of the vertex graph; edges joining vertices that differ in `split` are cut."""
    n = len(mesh.vertices)
    if n == 0:
        return np.zeros(0, dtype=int)
    t = mesh.triangles
    rows = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
    cols = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    if split is not None:
        keep = split[rows] == split[cols]
        rows, cols = rows[keep], cols[keep]
    adjacency = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    _, labels = connected_components(adjacency, directed=False)
    return labels


def factor_sheet_vertices(f, params: Mapping[str, float], field: str, vertices: np.ndarray,
                          cell: float) -> np.ndarray:
    """
    Vertices lying on a sheet F_i = 0 of a velocity component that divides the field
    (first-order distance to the sheet below FACTOR_DISTANCE cells).
    """
    factors = bind_phi(f, params).velocity_factors[field]
    on_sheet = np.zeros(len(vertices), dtype=bool)
    if not factors or not len(vertices):
        return on_sheet
    stack = time_derivatives_batch(f, params, vertices)
    for i in factors:
        slope = np.linalg.norm(stack.jac[:, i, :], axis=1)
        distance = np.full(len(vertices), np.inf)
        np.divide(np.abs(stack.velocity[:, i]), slope, out=distance, where=slope > 0)
        on_sheet |= distance < FACTOR_DISTANCE * cell
    return on_sheet


def flag_singularities(mesh: Mesh, f=None, params: Optional[Mapping[str, float]] = None) -> Mesh:
    """
    Flag vertices whose gradient norm falls below SINGULAR_RATIO x the median, and fold
    vertices where |d field/dz| < FOLD_RATIO |grad field| (the singular set of solving the
    surface as z = Psi(x, y)). With the field available, vertices on the sheets of a velocity
    component dividing the field are marked as well and components are cut along those sheets.
    A component is a spurious candidate when more than half its vertices are singular, fold
    or factor-sheet vertices.
    """
    if f is not None and not mesh.empty and mesh.job is not None:
        mesh.gradients = bind_phi(f, params).gradient(mesh.job.field, mesh.vertices)
        mesh.grad_norm = np.linalg.norm(mesh.gradients, axis=1)
        mesh.factor_sheet = factor_sheet_vertices(f, params, mesh.job.field, mesh.vertices,
                                                  float(np.linalg.norm(mesh.job.cell)))
    if mesh.empty:
        mesh.components = []
        return mesh
    median = float(np.median(mesh.grad_norm))
    mesh.flags = mesh.grad_norm < SINGULAR_RATIO * median
    if mesh.gradients is not None:
        vertical = np.abs(mesh.gradients[:, 2])
        mesh.fold = ~mesh.flags & (vertical < FOLD_RATIO * mesh.grad_norm)
    mesh.labels = label_components(mesh, split=mesh.factor_sheet)
    components = []
    for label in range(int(mesh.labels.max()) + 1):
        members = mesh.labels == label
        count = int(members.sum())
        if count == 0:
            continue
        flagged = float(mesh.flags[members].mean())
        fold = float(mesh.fold[members].mean())
        sheet = float(mesh.factor_sheet[members].mean())
        components.append({
            "label": label,
            "vertices": count,
            "flagged_fraction": flagged,
            "fold_fraction": fold,
            "factor_sheet": sheet > SPURIOUS_FRACTION,
            "spurious_candidate": max(flagged, fold, sheet) > SPURIOUS_FRACTION,
        })
    mesh.components = components
    if mesh.spurious_components:
        log("Surface", f"{len(mesh.spurious_components)} spurious-candidate component(s)")
    return mesh
