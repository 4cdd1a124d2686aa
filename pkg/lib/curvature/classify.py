from typing import Mapping, Optional, Sequence

import numpy as np

from lib.curvature.crossings import EPS_FP, MIN_DEPTH, counted, crossings, field_scale
from lib.curvature.darboux import darboux_residual, sample_manifold_points
from lib.curvature.phi import CORE, phi_along
from lib.dynamics.fixed_points import find_fixed_points
from lib.dynamics.wrapping import wrapping_number
from lib.interface.console import log, warn
from lib.section.poincare import default_section, section_crossings
from lib.section.return_map import build_return_map, transition_matrix

WRAPPING = "wrapping"
CROSSING = "crossing"


class AttractorVerdict:
    def __init__(self, verdict: str, fixed_points, wrapping, events, section, return_map, gamma,
                 darboux, phi_t_scale: float, min_depth: float = MIN_DEPTH):
        self.verdict = verdict
        self.fixed_points = fixed_points
        self.wrapping = wrapping
        self.events = events
        self.section = section
        self.return_map = return_map
        self.gamma = gamma
        self.darboux = darboux
        self.phi_t_scale = phi_t_scale
        self.min_depth = min_depth

    @property
    def crossing_count(self) -> int:
        return len(counted(self.events))

    @property
    def tangency_count(self) -> int:
        return sum(1 for e in self.events if e.tangency)

    @property
    def near_fixed_point_count(self) -> int:
        return sum(1 for e in self.events if e.near_fixed_point and not e.tangency)

    @property
    def shallow_count(self) -> int:
        return sum(1 for e in self.events if e.shallow and not e.tangency and not e.near_fixed_point)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "phi_t_crossings": {
                "field": CORE,
                "count": self.crossing_count,
                "tangencies": self.tangency_count,
                "near_fixed_point": self.near_fixed_point_count,
                "shallow": self.shallow_count,
                "eps_fp": {"value": EPS_FP, "unit": "state"},
                "min_depth": {"value": self.min_depth, "unit": "1"},
                "phi_t_scale": {"value": self.phi_t_scale, "unit": "state^3/time^6"},
            },
            "section": self.section.to_dict() if self.section is not None else None,
            "return_map": self.return_map.to_dict() if self.return_map is not None else None,
            "gamma": self.gamma.to_dict() if self.gamma is not None else None,
        }

    def __repr__(self):
        m = self.return_map.branch_count if self.return_map is not None else None
        return f"AttractorVerdict({self.verdict}, crossings={self.crossing_count}, m={m})"


def classify_attractor(f, params: Mapping[str, float], traj, fixed_points: Optional[Sequence] = None,
                       section=None, section_hint=None, darboux_points: int = 200, seed: int = 0,
                       name: str = "", min_depth: float = MIN_DEPTH) -> AttractorVerdict:
    """
    Verdict "crossing" when the post-transient trajectory crosses the phi_t core away from
    the fixed points, "wrapping" otherwise. Tangencies and excursions shallower than
    `min_depth` do not count. Also gathers the fixed points, W, the return-map partition
    and Darboux residuals for the report.
    """
    if fixed_points is None:
        fixed_points = find_fixed_points(f, params, seed=seed)
    wrapping = wrapping_number(list(fixed_points))

    events = crossings(f, params, traj, CORE, fixed_points=fixed_points, min_depth=min_depth)
    verdict = CROSSING if counted(events) else WRAPPING
    scale = field_scale(phi_along(f, params, traj)["phi_t"])

    rmap = None
    gamma = None
    if len(traj) > 1:
        if section is None:
            section = default_section(traj, fixed_points, section_hint)
        points = section_crossings(traj, section, f, params)
        rmap = build_return_map(points)
        if rmap.partitioned:
            gamma = transition_matrix(rmap)
    else:
        warn(f"{name}: trajectory too short for a Poincaré section")

    darboux = None
    if darboux_points > 0 and len(traj) > 1:
        manifold_points = sample_manifold_points(f, params, traj.bounds(margin=0.2), darboux_points, seed=seed)
        darboux = darboux_residual(f, params, manifold_points)

    result = AttractorVerdict(verdict, fixed_points, wrapping, events, section, rmap, gamma, darboux, scale,
                              min_depth)
    log("Classify", f"{name or 'system'}: {result.verdict} ({result.crossing_count} phi_t_core crossing(s)), "
                    f"m={rmap.branch_count if rmap is not None else None}")
    return result
