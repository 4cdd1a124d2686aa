from typing import List, Mapping, Optional, Sequence

import numpy as np

from lib.curvature.phi import FIELDS, field_values, phi_batch
from lib.dynamics.events import refine_root, sign_change_brackets
from lib.interface.console import log, progress

# crossings closer than this to a fixed point are not counted in the verdict
EPS_FP = 1e-3
# two opposite crossings closer than this many output steps form a tangency
TANGENCY_STEPS = 1.0
# excursions to the minority side reaching less than this in |phi_t_unit| are shallow
MIN_DEPTH = 0.1


class CrossingEvent:
    def __init__(self, t: float, state, which: str, direction: int, value: float, depth: float = 1.0):
        self.t = float(t)
        self.state = np.asarray(state, dtype=float)
        self.which = which
        self.direction = int(direction)
        self.value = float(value)
        self.depth = float(depth)
        self.tangency = False
        self.near_fixed_point = False
        self.shallow = False

    @property
    def counts(self) -> bool:
        return not self.tangency and not self.near_fixed_point and not self.shallow

    @property
    def direction_label(self) -> str:
        return "-+" if self.direction > 0 else "+-"

    def to_dict(self) -> dict:
        return {"t": self.t, "state": self.state.tolist(), "which": self.which,
                "direction": self.direction_label, "value": self.value, "depth": self.depth,
                "tangency": self.tangency, "near_fixed_point": self.near_fixed_point,
                "shallow": self.shallow}

    def __repr__(self):
        return f"CrossingEvent(t={self.t:.6f}, {self.which} {self.direction_label})"


def excursion_depths(values: np.ndarray, depth: np.ndarray) -> np.ndarray:
    """
    Per sample, the largest |depth| over the run of minority-sign samples it belongs to;
    0 on the majority side. The majority sign is the one most samples carry (zero is positive).
    """
    values = np.asarray(values, dtype=float)
    depth = np.abs(np.asarray(depth, dtype=float))
    positive = values >= 0
    minority = ~positive if positive.sum() * 2 >= positive.size else positive
    out = np.zeros(values.shape[0])
    edges = np.diff(np.concatenate([[0], minority.astype(np.int8), [0]]))
    for start, stop in zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)):
        out[start:stop] = depth[start:stop].max()
    return out


def crossings(f, params: Mapping[str, float], traj, which: str = "phi_t",
              fixed_points: Optional[Sequence] = None, eps_fp: float = EPS_FP,
              min_depth: float = 0.0) -> List[CrossingEvent]:
    """
    Time-ordered sign changes of phi, phi_c, phi_t or phi_t_core along a trajectory, each
    refined on the cubic Hermite interpolant of the trajectory. Tangencies, passes within
    `eps_fp` of a fixed point and excursions shallower than `min_depth` (measured in
    |phi_t_unit|) are returned but flagged; use `counted(events)` for the verdict.
    """
    if which not in FIELDS:
        raise ValueError(f"unknown component '{which}' (use one of {', '.join(FIELDS)})")
    if len(traj) < 2:
        return []
    values = field_values(f, params, which, traj.states)
    brackets = sign_change_brackets(values)
    if brackets.size == 0:
        log("Crossings", f"{which}: no sign change over {len(traj)} samples")
        return []

    depths = excursion_depths(values, phi_batch(f, params, traj.states)["phi_t_unit"])
    spline = traj.interpolant(f, params)

    def g_state(point):
        return field_values(f, params, which, np.asarray(point).reshape(1, 3))[0]

    def g(t):
        return g_state(spline(t))

    events = []
    for k in progress(brackets, desc=f"refine {which}"):
        t_root = refine_root(g, traj.t[k], traj.t[k + 1])
        state = spline(t_root)
        direction = 1 if values[k] < 0 else -1
        event = CrossingEvent(t_root, state, which, direction, g_state(state), max(depths[k], depths[k + 1]))
        event.shallow = event.depth < min_depth
        events.append(event)

    _flag_tangencies(events, traj.dt_output)
    if fixed_points:
        locations = np.array([np.asarray(getattr(p, "location", p), dtype=float) for p in fixed_points])
        for event in events:
            if np.min(np.linalg.norm(locations - event.state, axis=1)) < eps_fp:
                event.near_fixed_point = True

    log("Crossings", f"{which}: {len(events)} sign change(s), {len(counted(events))} counted")
    return events


def _flag_tangencies(events: List[CrossingEvent], dt_output: float):
    gap = TANGENCY_STEPS * dt_output
    for first, second in zip(events, events[1:]):
        if second.direction != first.direction and second.t - first.t < gap:
            first.tangency = True
            second.tangency = True


def counted(events: Sequence[CrossingEvent]) -> List[CrossingEvent]:
    return [e for e in events if e.counts]


def field_scale(values: np.ndarray) -> float:
    """max(1, median |field|), the scale crossing residuals are measured against."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 1.0
    return max(1.0, float(np.median(np.abs(values))))
