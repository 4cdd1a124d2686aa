"""
Darboux invariance diagnostics for the manifold phi = 0.

The residual |grad(phi) . F| / (|grad(phi)| |F|) vanishes on phi = 0 when phi is a
Darboux polynomial (L_F phi = k phi). For linear flows X' = AX the cofactor is tr(A).
"""
from typing import Mapping, Optional

import numpy as np

from lib.curvature.phi import bind_phi
from lib.dynamics.events import refine_root
from lib.interface.console import log

DEGENERATE_GRADIENT = 1e-12
DEFAULT_POINTS = 200
CHORD_SAMPLES = 64


class DarbouxStats:
    def __init__(self, residuals: np.ndarray, excluded: int, requested: int):
        self.residuals = np.asarray(residuals, dtype=float)
        self.excluded = int(excluded)
        self.requested = int(requested)

    @property
    def count(self) -> int:
        return int(self.residuals.size)

    def summary(self) -> dict:
        """Statistics rounded to 3 significant figures."""
        def sig3(v):
            return float(f"{v:.3g}")
        out = {"points": self.count, "excluded_degenerate": self.excluded, "unit": "dimensionless"}
        if self.count:
            r = self.residuals
            out.update({"median": sig3(np.median(r)), "p90": sig3(np.percentile(r, 90)),
                        "max": sig3(r.max()), "mean": sig3(r.mean())})
        else:
            out.update({"median": None, "p90": None, "max": None, "mean": None})
        return out

    def __repr__(self):
        return f"DarbouxStats({self.summary()})"


def sample_manifold_points(f, params: Mapping[str, float], bounds, n_points: int = DEFAULT_POINTS,
                           seed: int = 0, which: str = "phi", max_chords: Optional[int] = None) -> np.ndarray:
    """Points with phi = 0, found by root-finding along random chords of the box."""
    bounds = np.asarray(bounds, dtype=float)
    bound_phi = bind_phi(f, params)
    rng = np.random.default_rng(seed)
    max_chords = max_chords or 50 * n_points
    points = []
    s = np.linspace(0.0, 1.0, CHORD_SAMPLES)
    for _ in range(max_chords):
        if len(points) >= n_points:
            break
        a = rng.uniform(bounds[:, 0], bounds[:, 1])
        b = rng.uniform(bounds[:, 0], bounds[:, 1])
        chord = a + s[:, None] * (b - a)
        values = bound_phi.value(which, chord)
        changes = np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)
        if changes.size == 0:
            continue
        k = changes[0]

        def g(u):
            return bound_phi.value(which, a + u * (b - a))[0]
        u = refine_root(g, s[k], s[k + 1])
        points.append(a + u * (b - a))
    return np.array(points).reshape(-1, 3)


def darboux_residual(f, params: Mapping[str, float], points, which: str = "phi") -> DarbouxStats:
    """Distribution of |grad . F| / (|grad| |F|); degenerate points (grad or F ~ 0) are excluded."""
    points = np.atleast_2d(np.asarray(points, dtype=float)).reshape(-1, 3)
    if points.shape[0] == 0:
        return DarbouxStats(np.empty(0), 0, 0)
    bound_phi = bind_phi(f, params)
    grad = bound_phi.gradient(which, points)
    field = f.evaluate_many(points, params)
    gnorm = np.linalg.norm(grad, axis=1)
    fnorm = np.linalg.norm(field, axis=1)
    grad_scale = max(float(np.median(gnorm)), 1e-300)
    field_scale = max(float(np.median(fnorm)), 1e-300)
    ok = (gnorm > DEGENERATE_GRADIENT * grad_scale) & (fnorm > DEGENERATE_GRADIENT * field_scale)
    residuals = np.abs(np.einsum("ni,ni->n", grad[ok], field[ok])) / (gnorm[ok] * fnorm[ok])
    stats = DarbouxStats(residuals, int((~ok).sum()), points.shape[0])
    log("Darboux", f"{stats.count} point(s), {stats.excluded} excluded, median residual "
                   f"{stats.summary()['median']}")
    return stats


def linear_darboux_defect(f, params: Mapping[str, float], points) -> np.ndarray:
    """|grad(phi) . F - tr(J) phi| at each point; identically zero for linear flows X' = AX."""
    points = np.atleast_2d(np.asarray(points, dtype=float)).reshape(-1, 3)
    bound_phi = bind_phi(f, params)
    grad = bound_phi.gradient("phi", points)
    field = f.evaluate_many(points, params)
    phi = bound_phi.value("phi", points)
    jacs = np.array([f.jacobian.evaluate(p, params) for p in points])
    trace = np.trace(jacs, axis1=1, axis2=2)
    return np.abs(np.einsum("ni,ni->n", grad, field) - trace * phi)
