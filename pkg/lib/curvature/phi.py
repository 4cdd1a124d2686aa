"""
Flow curvature manifold phi = det(X', X'', X''') and its split

    phi_c = X' . (J X'  ^  J X'')           time-independent component
    phi_t = X' . (X''   ^  (dJ/dt) X')      time-dependent component

evaluated numerically from the derivative stack, or symbolically as polynomials.

phi_t carries every velocity component whose square or product appears in the
transport term as a polynomial factor. Those factors vanish on planes and sheets
through the fixed points that a trajectory sweeps across on every turn, so the
verdict reads the core phi_t_core: phi_t with the velocity factors divided out.
"""
from functools import cached_property, lru_cache
from typing import Dict, Mapping

import numpy as np

from lib.field.derivatives import DerivativeStack, symbolic_derivatives, time_derivatives_batch
from lib.field.expr import add, cross, dot, gradient, Expr
from lib.field.polynomial import degree_of, divide, expand, strip_factors, to_expr

COMPONENTS = ("phi", "phi_c", "phi_t")
CORE = "phi_t_core"
FIELDS = COMPONENTS + (CORE,)
CHUNK = 200_000
_STACK_KEYS = COMPONENTS + ("phi_det", "scale", "phi_t_unit")


def _triple(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.einsum("ni,ni->n", a, np.cross(b, c))


def components_from_stack(stack: DerivativeStack) -> Dict[str, np.ndarray]:
    """
    phi (triple product), phi_c, phi_t and phi_det (3x3 determinant) for a batched stack,
    plus phi_t_unit: phi_t over |X'| |X''| |(dJ/dt) X'|, in [-1, 1] and 0 where a factor vanishes.
    """
    v, a, j = stack.velocity, stack.acceleration, stack.jerk
    jac_a = np.einsum("nij,nj->ni", stack.jac, a)
    transport = np.einsum("nij,nj->ni", stack.jac_dot, v)
    phi_t = _triple(v, a, transport)
    norms = np.linalg.norm(v, axis=1) * np.linalg.norm(a, axis=1) * np.linalg.norm(transport, axis=1)
    unit = np.zeros_like(phi_t)
    np.divide(phi_t, norms, out=unit, where=norms > 0)
    return {
        "phi": _triple(v, a, j),
        "phi_c": _triple(v, a, jac_a),
        "phi_t": phi_t,
        "phi_det": np.linalg.det(np.stack([v, a, j], axis=2)),
        "scale": np.linalg.norm(v, axis=1) * np.linalg.norm(a, axis=1) * np.linalg.norm(j, axis=1),
        "phi_t_unit": unit,
    }


def phi_batch(f, params: Mapping[str, float], points) -> Dict[str, np.ndarray]:
    """Evaluate the components at every row of `points`, in chunks to bound memory."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        return {key: np.empty(0) for key in _STACK_KEYS}
    parts = [components_from_stack(time_derivatives_batch(f, params, points[i:i + CHUNK]))
             for i in range(0, points.shape[0], CHUNK)]
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


def phi_along(f, params: Mapping[str, float], traj) -> Dict[str, np.ndarray]:
    return phi_batch(f, params, traj.states)


def field_values(f, params: Mapping[str, float], which: str, points) -> np.ndarray:
    """One of FIELDS at every row of `points`; the core is evaluated from its expanded polynomial."""
    if which not in FIELDS:
        raise ValueError(f"unknown component '{which}' (use one of {', '.join(FIELDS)})")
    if which == CORE:
        return bind_phi(f, params).value(CORE, points)
    return phi_batch(f, params, points)[which]


class CurvatureSample:
    def __init__(self, state, phi, phi_c, phi_t, phi_det, grad_phi):
        self.state = np.asarray(state, dtype=float)
        self.phi = float(phi)
        self.phi_c = float(phi_c)
        self.phi_t = float(phi_t)
        self.phi_det = float(phi_det)
        self.grad_phi = np.asarray(grad_phi, dtype=float)

    def decomposition_error(self) -> float:
        """|phi - phi_c - phi_t| relative to the largest of the three magnitudes."""
        largest = max(abs(self.phi), abs(self.phi_c), abs(self.phi_t), 1e-300)
        return abs(self.phi - self.phi_c - self.phi_t) / largest

    def to_dict(self) -> dict:
        return {"state": self.state.tolist(), "phi": self.phi, "phi_c": self.phi_c, "phi_t": self.phi_t,
                "grad_phi": self.grad_phi.tolist()}

    def __repr__(self):
        return f"CurvatureSample(phi={self.phi:.6g}, phi_c={self.phi_c:.6g}, phi_t={self.phi_t:.6g})"


def phi_eval(f, params: Mapping[str, float], state) -> CurvatureSample:
    state = np.asarray(state, dtype=float).reshape(1, 3)
    values = phi_batch(f, params, state)
    grad = bind_phi(f, params).gradient("phi", state)[0]
    return CurvatureSample(state[0], values["phi"][0], values["phi_c"][0], values["phi_t"][0],
                           values["phi_det"][0], grad)


class PhiSymbolic:
    """Closed-form phi, phi_c, phi_t as expression trees in (x, y, z) and the field's parameters."""

    def __init__(self, f):
        velocity, acceleration, jerk_static, jerk_transport = symbolic_derivatives(f)
        self.phi_c = dot(velocity, cross(acceleration, jerk_static))
        self.phi_t = dot(velocity, cross(acceleration, jerk_transport))
        jerk = tuple(add(s, t) for s, t in zip(jerk_static, jerk_transport))
        self.phi = dot(velocity, cross(acceleration, jerk))

    def component(self, which: str) -> Expr:
        if which not in COMPONENTS:
            raise ValueError(f"unknown component '{which}' (use one of {', '.join(COMPONENTS)})")
        return getattr(self, which)

    @cached_property
    def grad_phi(self):
        return gradient(self.phi)

    def as_tuple(self):
        return self.phi, self.phi_c, self.phi_t, self.grad_phi


@lru_cache(maxsize=64)
def phi_symbolic_cached(f) -> PhiSymbolic:
    return PhiSymbolic(f)


def phi_symbolic(f):
    """(phi, phi_c, phi_t, grad phi) as expression trees."""
    return phi_symbolic_cached(f).as_tuple()


class BoundPhi:
    """
    The three components and the phi_t core expanded into monomials for one numeric
    parameter binding. Expanded forms are compact, so grids, gradients and mesh
    polishing run on them.
    """

    def __init__(self, f, params: Mapping[str, float]):
        sym = phi_symbolic_cached(f)
        polys = {which: expand(sym.component(which), params) for which in COMPONENTS}
        velocity = [expand(e, params) for e in f.exprs]
        polys[CORE] = strip_factors(polys["phi_t"], velocity)
        # indices i such that the velocity component F_i divides the field
        self.velocity_factors = {
            which: tuple(i for i, q in enumerate(velocity)
                         if poly and degree_of(q) > 0 and divide(poly, q) is not None)
            for which, poly in polys.items()
        }
        self.exprs = {which: to_expr(poly) for which, poly in polys.items()}
        self.grads = {which: gradient(e) for which, e in self.exprs.items()}

    def value(self, which: str, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.exprs[which].evaluate_many(points, {})

    def gradient(self, which: str, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.column_stack([g.evaluate_many(points, {}) for g in self.grads[which]])


@lru_cache(maxsize=64)
def _bind_phi_cached(f, key) -> BoundPhi:
    return BoundPhi(f, dict(key))


def bind_phi(f, params: Mapping[str, float]) -> BoundPhi:
    return _bind_phi_cached(f, tuple(sorted((k, float(v)) for k, v in params.items())))
