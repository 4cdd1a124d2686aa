"""
Fixed points of polynomial flows: Newton search from a seed grid, eigenvalue
classification and the local shape of the flow curvature manifold around each point.
"""
from typing import List, Mapping, Optional, Sequence

import numpy as np

from lib.field.derivatives import evaluate_matrix
from lib.interface.console import log

DEFAULT_SEARCH_BOX = ((-20.0, 20.0), (-20.0, 20.0), (-20.0, 20.0))
DEFAULT_GRID_N = 8
NEWTON_MAX_ITER = 60
RESIDUAL_TOLERANCE = 1e-10
MERGE_DISTANCE = 1e-6
ESCAPE_NORM = 1e4
REAL_TOLERANCE = 1e-9

NODE = "node"
SADDLE = "saddle"
FOCUS_NODE = "focus-node"
SADDLE_FOCUS = "saddle-focus"

SHAPE_PLANE = "plane"
SHAPE_THREE_PLANES = "three-planes"
SHAPE_PLANE_PARABOLOIDS = "plane+two-paraboloids"


class FixedPoint:
    def __init__(self, location, jac, eigenvalues, eigenvectors, residual: float):
        self.location = np.asarray(location, dtype=float)
        self.jac = np.asarray(jac, dtype=float)
        self.eigenvalues = np.asarray(eigenvalues, dtype=complex)
        self.eigenvectors = np.asarray(eigenvectors, dtype=complex)
        self.residual = float(residual)
        self.kind = classify_eigenvalues(self.eigenvalues)
        self.role = "inner"
        shape = classify_fp_shape(self)
        self.shape = shape["shape"]
        self.has_phi_t_component = shape["has_phi_t_component"]

    @property
    def unstable_dimension(self) -> int:
        return int(np.sum(self.eigenvalues.real > 0))

    def complex_pair(self):
        """(pair eigenvalue with positive imaginary part, real eigenvalue) or None."""
        complex_mask = np.abs(self.eigenvalues.imag) > REAL_TOLERANCE * np.maximum(1.0, np.abs(self.eigenvalues))
        if complex_mask.sum() != 2:
            return None
        pair = self.eigenvalues[complex_mask]
        real = self.eigenvalues[~complex_mask][0].real
        return pair[np.argmax(pair.imag)], real

    def eigen_residual(self) -> float:
        """max over pairs of |(J - lambda I) v|."""
        worst = 0.0
        for k in range(3):
            v = self.eigenvectors[:, k]
            worst = max(worst, float(np.linalg.norm(self.jac @ v - self.eigenvalues[k] * v)))
        return worst

    def to_dict(self) -> dict:
        return {
            "location": {"value": self.location.tolist(), "unit": "state"},
            "eigenvalues": {"value": [{"re": float(l.real), "im": float(l.imag)} for l in self.eigenvalues],
                            "unit": "1/time"},
            "class": self.kind,
            "role": self.role,
            "shape": self.shape,
            "has_phi_t_component": self.has_phi_t_component,
            "unstable_dimension": self.unstable_dimension,
            "residual": {"value": self.residual, "unit": "state/time"},
        }

    def __repr__(self):
        loc = ", ".join(f"{v:.6g}" for v in self.location)
        return f"FixedPoint(({loc}), {self.kind}, {self.role})"


def classify_eigenvalues(eigenvalues: Sequence[complex]) -> str:
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    scale = np.maximum(1.0, np.abs(eigenvalues))
    complex_mask = np.abs(eigenvalues.imag) > REAL_TOLERANCE * scale
    if not complex_mask.any():
        signs = np.sign(eigenvalues.real)
        return SADDLE if (signs > 0).any() and (signs < 0).any() else NODE
    pair_re = eigenvalues[complex_mask][0].real
    real = eigenvalues[~complex_mask][0].real
    if pair_re * real < 0:
        return SADDLE_FOCUS
    return FOCUS_NODE


def classify_fp_shape(fp) -> dict:
    """Local shape of the curvature manifold near a fixed point (object with `.kind` or an eigenvalue list)."""
    kind = fp.kind if hasattr(fp, "kind") else classify_eigenvalues(fp)
    if kind == SADDLE:
        shape = SHAPE_THREE_PLANES
    elif kind == SADDLE_FOCUS:
        shape = SHAPE_PLANE_PARABOLOIDS
    else:
        shape = SHAPE_PLANE
    return {"class": kind, "shape": shape, "has_phi_t_component": kind == SADDLE_FOCUS}


def _seed_grid(search_box, grid_n: int, seed: Optional[int]) -> np.ndarray:
    box = np.asarray(search_box, dtype=float)
    if box.shape != (3, 2) or np.any(box[:, 1] <= box[:, 0]):
        raise ValueError(f"search box must be three nonempty [lo, hi] intervals, got {box.tolist()}")
    if grid_n < 1:
        raise ValueError(f"grid_n must be >= 1, got {grid_n}")
    axes = [np.linspace(lo, hi, grid_n) if grid_n > 1 else np.array([(lo + hi) / 2]) for lo, hi in box]
    seeds = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    if seed is not None:
        cell = (box[:, 1] - box[:, 0]) / max(grid_n - 1, 1)
        rng = np.random.default_rng(seed)
        seeds = seeds + rng.uniform(-0.25, 0.25, size=seeds.shape) * cell
    return seeds


def newton(f, params: Mapping[str, float], seeds: np.ndarray) -> np.ndarray:
    """Batched Newton iteration; returns the final iterates (rows may be non-converged or non-finite)."""
    x = np.array(seeds, dtype=float)
    active = np.ones(x.shape[0], dtype=bool)
    for _ in range(NEWTON_MAX_ITER):
        if not active.any():
            break
        pts = x[active]
        F = f.evaluate_many(pts, params)
        J = evaluate_matrix(f.jacobian.matrix, pts, params)
        step = np.einsum("nij,nj->ni", np.linalg.pinv(J), F)
        pts = pts - step
        x[active] = pts
        done = np.linalg.norm(step, axis=1) < 1e-14 * np.maximum(1.0, np.linalg.norm(pts, axis=1))
        escaped = ~np.all(np.isfinite(pts), axis=1) | (np.linalg.norm(pts, axis=1) > ESCAPE_NORM)
        idx = np.flatnonzero(active)
        active[idx[done | escaped]] = False
    return x


def find_fixed_points(f, params: Mapping[str, float], search_box=DEFAULT_SEARCH_BOX,
                      grid_n: int = DEFAULT_GRID_N, seed: Optional[int] = 0) -> List[FixedPoint]:
    """
    Newton search from a grid_n^3 seed grid; roots are merged when closer than 1e-6
    and kept only if |F| < 1e-10. Roles: inner = the point with a 2D unstable manifold.
    """
    roots = newton(f, params, _seed_grid(search_box, grid_n, seed))
    finite = np.all(np.isfinite(roots), axis=1)
    roots = roots[finite]
    residuals = np.linalg.norm(f.evaluate_many(roots, params), axis=1) if len(roots) else np.empty(0)
    good = residuals < RESIDUAL_TOLERANCE
    roots, residuals = roots[good], residuals[good]

    merged: List[np.ndarray] = []
    merged_res: List[float] = []
    for k in np.argsort(residuals, kind="stable"):
        if all(np.linalg.norm(roots[k] - m) >= MERGE_DISTANCE for m in merged):
            merged.append(roots[k])
            merged_res.append(residuals[k])

    order = sorted(range(len(merged)), key=lambda i: (round(float(np.linalg.norm(merged[i])), 9), tuple(merged[i])))
    points = []
    for i in order:
        jac = f.jacobian.evaluate(merged[i], params)
        eigenvalues, eigenvectors = np.linalg.eig(jac)
        points.append(FixedPoint(merged[i], jac, eigenvalues, eigenvectors, merged_res[i]))
    assign_roles(points)
    log("FixedPoints", f"found {len(points)} fixed point(s) from {grid_n ** 3} seeds")
    return points


def assign_roles(points: List[FixedPoint]):
    if not points:
        return
    for p in points:
        p.role = "outer"
    planar = [p for p in points if p.unstable_dimension == 2]
    inner = planar[0] if planar else min(points, key=lambda p: float(np.linalg.norm(p.location)))
    inner.role = "inner"


def inner_and_outer(points: List[FixedPoint]):
    inner = next((p for p in points if p.role == "inner"), None)
    outer = next((p for p in points if p.role == "outer"), None)
    return inner, outer
