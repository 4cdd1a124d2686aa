"""
Poincaré sections of stored trajectories.

A section is the plane (X - point) . normal = 0, optionally restricted to the
half-plane (X - point) . axis >= 0, crossed in one direction ("+" means the
normal velocity X' . normal is positive) or both.
"""
from typing import List, Mapping, Optional, Sequence

import numpy as np

from lib.dynamics.events import refine_root, sign_change_brackets
from lib.interface.console import log, warn

TANGENTIAL_SPEED = 1e-8
DIRECTIONS = ("+", "-", "both")


class SectionSpec:
    def __init__(self, point: Sequence[float], normal: Sequence[float], direction: str = "both",
                 axis: Optional[Sequence[float]] = None):
        self.point = np.asarray(point, dtype=float)
        normal = np.asarray(normal, dtype=float)
        norm = np.linalg.norm(normal)
        if self.point.shape != (3,) or normal.shape != (3,):
            raise ValueError("section point and normal must be 3-vectors")
        if norm == 0 or not np.isfinite(norm):
            raise ValueError(f"section normal must be nonzero, got {normal.tolist()}")
        self.normal = normal / norm
        if direction not in DIRECTIONS:
            raise ValueError(f"section direction must be one of {DIRECTIONS}, got {direction!r}")
        self.direction = direction
        self.axis = None
        if axis is not None:
            axis = np.asarray(axis, dtype=float)
            # keep only the in-plane part
            axis = axis - np.dot(axis, self.normal) * self.normal
            if np.linalg.norm(axis) == 0:
                raise ValueError("section axis must not be parallel to the normal")
            self.axis = axis / np.linalg.norm(axis)

    @property
    def sign(self) -> int:
        return {"+": 1, "-": -1, "both": 0}[self.direction]

    def distance(self, states: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(states) - self.point) @ self.normal

    def rho(self, states: np.ndarray) -> np.ndarray:
        """Signed distance along `axis` from the point, or unsigned in-plane distance without an axis."""
        offset = np.atleast_2d(states) - self.point
        if self.axis is not None:
            return offset @ self.axis
        in_plane = offset - np.outer(offset @ self.normal, self.normal)
        return np.linalg.norm(in_plane, axis=1)

    def to_dict(self) -> dict:
        return {"point": self.point.tolist(), "normal": self.normal.tolist(), "direction": self.direction,
                "axis": self.axis.tolist() if self.axis is not None else None, "unit": "state"}

    def __str__(self):
        text = "p={};n={};dir={}".format(",".join(f"{v:.12g}" for v in self.point),
                                        ",".join(f"{v:.12g}" for v in self.normal), self.direction)
        if self.axis is not None:
            text += ";u=" + ",".join(f"{v:.12g}" for v in self.axis)
        return text

    def __repr__(self):
        return f"SectionSpec({self})"

    @classmethod
    def parse(cls, text: str) -> "SectionSpec":
        """Parse 'p=PX,PY,PZ;n=NX,NY,NZ;dir=-' with an optional ';u=UX,UY,UZ' half-plane axis."""
        fields = {}
        for part in text.split(";"):
            if not part.strip():
                continue
            key, sep, value = part.partition("=")
            if not sep:
                raise ValueError(f"malformed section field {part!r} (expected key=value)")
            fields[key.strip()] = value.strip()
        unknown = set(fields) - {"p", "n", "dir", "u"}
        if unknown or "p" not in fields or "n" not in fields:
            raise ValueError(f"section needs p=... and n=..., optional dir= and u=; got {text!r}")

        def vector(key):
            try:
                values = [float(v) for v in fields[key].split(",")]
            except ValueError:
                raise ValueError(f"section {key}= must be three numbers, got {fields[key]!r}") from None
            if len(values) != 3:
                raise ValueError(f"section {key}= must be three numbers, got {fields[key]!r}")
            return values

        return cls(vector("p"), vector("n"), fields.get("dir", "both"), vector("u") if "u" in fields else None)


class SectionPoint:
    def __init__(self, t: float, state, rho: float):
        self.t = float(t)
        self.state = np.asarray(state, dtype=float)
        self.rho = float(rho)

    def __repr__(self):
        return f"SectionPoint(t={self.t:.6f}, rho={self.rho:.6g})"


class SectionCrossings(list):
    """Time-ordered SectionPoints plus bookkeeping on rejected crossings."""

    def __init__(self, points=(), tangential=0, off_half_plane=0, spec: Optional[SectionSpec] = None):
        super().__init__(points)
        self.tangential = tangential
        self.off_half_plane = off_half_plane
        self.spec = spec

    @property
    def rho(self) -> np.ndarray:
        return np.array([p.rho for p in self])

    @property
    def times(self) -> np.ndarray:
        return np.array([p.t for p in self])

    @property
    def states(self) -> np.ndarray:
        return np.array([p.state for p in self]).reshape(-1, 3)


def section_crossings(traj, spec: SectionSpec, f=None, params: Optional[Mapping[str, float]] = None) -> SectionCrossings:
    """
    Crossings of the section, refined on the dense interpolant of the trajectory
    (cubic Hermite when the field is given, cubic spline otherwise).
    """
    if len(traj) < 2:
        return SectionCrossings(spec=spec)
    g_samples = spec.distance(traj.states)
    brackets = sign_change_brackets(g_samples, spec.sign)
    if brackets.size == 0:
        return SectionCrossings(spec=spec)

    spline = traj.interpolant(f, params)
    velocity = spline.derivative()

    def g(t):
        return float(np.dot(spline(t) - spec.point, spec.normal))

    points = []
    tangential = 0
    off_half_plane = 0
    for k in brackets:
        t_root = refine_root(g, traj.t[k], traj.t[k + 1])
        state = spline(t_root)
        speed = f.evaluate(state, params) if f is not None else velocity(t_root)
        normal_speed = float(np.dot(speed, spec.normal))
        if abs(normal_speed) <= TANGENTIAL_SPEED:
            tangential += 1
            continue
        if spec.sign and np.sign(normal_speed) != spec.sign:
            tangential += 1
            continue
        rho = float(spec.rho(state)[0])
        if spec.axis is not None and rho < 0:
            off_half_plane += 1
            continue
        points.append(SectionPoint(t_root, state, rho))

    if tangential:
        warn(f"{tangential} tangential section crossing(s) dropped")
    log("Section", f"{len(points)} crossing(s) of {spec}")
    return SectionCrossings(points, tangential, off_half_plane, spec)


def default_section(traj, fixed_points: Sequence, hint=None) -> SectionSpec:
    """
    Half-plane through the inner fixed point. Without a hint the normal is the axis of
    largest trajectory variance, the half-plane axis is the axis of second largest
    variance pointing toward the centroid, and the crossing direction is the one
    with more crossings on that half-plane.
    """
    inner = next((p for p in fixed_points if getattr(p, "role", "inner") == "inner"), None)
    origin = np.asarray(inner.location if inner is not None else traj.centroid(), dtype=float)
    if hint is not None:
        return SectionSpec(origin, hint.normal, hint.direction, hint.axis)

    variance = traj.states.var(axis=0)
    order = np.argsort(variance, kind="stable")[::-1]
    normal = np.eye(3)[order[0]]
    axis = np.eye(3)[order[1]]
    if np.dot(traj.centroid() - origin, axis) < 0:
        axis = -axis

    g = (traj.states - origin) @ normal
    rho = (traj.states - origin) @ axis
    counts = {}
    for direction, sign in (("+", 1), ("-", -1)):
        k = sign_change_brackets(g, sign)
        counts[direction] = int(np.sum(rho[k] >= 0))
    direction = "+" if counts["+"] >= counts["-"] else "-"
    return SectionSpec(origin, normal, direction, axis)
