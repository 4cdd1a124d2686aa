"""
First-return maps rho_k -> rho_{k+1}, their partition into monotone branches and
the transition matrix between branches.

Segmentation: pairs are sorted by rho_k, the images are smoothed with a moving
median, and a branch boundary (critical point) is placed where the slope sign
flips and then holds for at least `r_min` consecutive sorted points.
"""
from typing import List, Optional, Sequence

import numpy as np
from scipy.ndimage import median_filter

from lib.interface.console import log, warn

MIN_POINTS = 200
R_MIN = 8
SMOOTHING_WINDOW = 5
VIOLATION_BUDGET = 0.02
# adjacent branches merge when their image ranges overlap by more than MERGE_OVERLAP
# and the narrower one spans less than MERGE_WIDTH of its neighbour in rho_k
MERGE_OVERLAP = 0.8
MERGE_WIDTH = 0.2


def _slope_signs(values: np.ndarray) -> np.ndarray:
    """Signs of successive differences with zeros replaced by the previous nonzero sign."""
    signs = np.sign(np.diff(values))
    nonzero = np.flatnonzero(signs)
    if nonzero.size == 0:
        return np.ones_like(signs)
    # forward fill; leading zeros take the first nonzero sign
    idx = np.maximum.accumulate(np.where(signs != 0, np.arange(signs.size), 0))
    filled = signs[idx]
    filled[:nonzero[0]] = signs[nonzero[0]]
    return filled


def segment_monotone_runs(xs: np.ndarray, ys: np.ndarray, r_min: int = R_MIN,
                          window: int = SMOOTHING_WINDOW):
    """
    Monotone-run segmentation of points already sorted by x.
    Returns (boundary indices into the sorted arrays, slope sign of each run).
    """
    if xs.size < 2:
        return [], [1]
    smooth = median_filter(ys, size=window, mode="nearest") if window > 1 else ys
    signs = _slope_signs(smooth)
    boundaries = []
    run_signs = [int(signs[0])]
    current = signs[0]
    i = 1
    while i < signs.size:
        if signs[i] != current:
            window_end = i + r_min
            if window_end <= signs.size and np.all(signs[i:window_end] == signs[i]):
                boundaries.append(i)
                current = signs[i]
                run_signs.append(int(current))
                i = window_end
                continue
        i += 1
    return boundaries, run_signs


def merged_branch_count(xs: np.ndarray, ys: np.ndarray, boundaries: Sequence[int],
                        overlap: float = MERGE_OVERLAP, width: float = MERGE_WIDTH) -> int:
    """
    Branch count after collapsing split branches: neighbours whose rho_{k+1} ranges overlap
    by more than `overlap` of the shorter range, the narrower of the two covering less than
    `width` of the other in rho_k, are merged until no such pair is left.
    """
    edges = [0] + list(boundaries) + [xs.size - 1]
    branches = [[xs[a], xs[b], ys[a:b + 1].min(), ys[a:b + 1].max()] for a, b in zip(edges, edges[1:])]
    merged = True
    while merged and len(branches) > 1:
        merged = False
        for k in range(len(branches) - 1):
            left, right = branches[k], branches[k + 1]
            shared = min(left[3], right[3]) - max(left[2], right[2])
            shorter = min(left[3] - left[2], right[3] - right[2])
            narrow, wide = sorted((left[1] - left[0], right[1] - right[0]))
            if shorter > 0 and shared > overlap * shorter and narrow < width * wide:
                branches[k:k + 2] = [[left[0], right[1], min(left[2], right[2]), max(left[3], right[3])]]
                merged = True
                break
    return len(branches)


class ReturnMap:
    def __init__(self, rho: Sequence[float], r_min: int = R_MIN, window: int = SMOOTHING_WINDOW,
                 min_points: int = MIN_POINTS):
        self.rho = np.asarray(rho, dtype=float)
        self.r_min = r_min
        self.window = window
        self.pairs = np.column_stack([self.rho[:-1], self.rho[1:]]) if self.rho.size > 1 else np.empty((0, 2))
        self.critical_points: List[float] = []
        self.run_signs: List[int] = []
        self.symbols = np.empty(0, dtype=int)
        self.violations: List[float] = []
        self.branch_count: Optional[int] = None
        self.raw_branch_count: Optional[int] = None
        self.merged_branch_count: Optional[int] = None
        self.partitioned = False
        self.warning = ""

        if self.rho.size < min_points:
            self.warning = f"only {self.rho.size} crossings (< {min_points}); map left unpartitioned"
            return

        order = np.argsort(self.pairs[:, 0], kind="stable")
        xs, ys = self.pairs[order, 0], self.pairs[order, 1]
        boundaries, self.run_signs = segment_monotone_runs(xs, ys, r_min, window)
        # boundary i sits between sorted points i and i + 1 of the smoothed slope sequence
        self.critical_points = [float(xs[i]) for i in boundaries]
        self.branch_count = len(self.critical_points) + 1
        raw_boundaries, _ = segment_monotone_runs(xs, ys, r_min=1, window=1)
        self.raw_branch_count = len(raw_boundaries) + 1
        self.merged_branch_count = merged_branch_count(xs, ys, boundaries)
        self.symbols = self.symbol_of(self.pairs[:, 0])
        self.violations = self._violations(xs, ys)
        self.partitioned = True

    def symbol_of(self, rho) -> np.ndarray:
        """Branch index of each rho value (panel k covers (c_{k-1}, c_k])."""
        return np.searchsorted(np.asarray(self.critical_points), np.asarray(rho, dtype=float), side="left")

    def _violations(self, xs, ys) -> List[float]:
        panel = self.symbol_of(xs)
        fractions = []
        for k in range(self.branch_count):
            sel = ys[panel == k]
            if sel.size < 2:
                fractions.append(0.0)
                continue
            steps = np.sign(np.diff(sel))
            steps = steps[steps != 0]
            expected = self.run_signs[k] if k < len(self.run_signs) else 1
            fractions.append(float(np.mean(steps != expected)) if steps.size else 0.0)
        return fractions

    @property
    def monotone(self) -> bool:
        return self.partitioned and all(v <= VIOLATION_BUDGET for v in self.violations)

    def to_dict(self) -> dict:
        return {
            "crossings": int(self.rho.size),
            "partitioned": self.partitioned,
            "m": self.branch_count,
            "raw_branch_count": self.raw_branch_count,
            "merged_branch_count": self.merged_branch_count,
            "critical_points": self.critical_points,
            "branch_slopes": ["increasing" if s > 0 else "decreasing" for s in self.run_signs],
            "violation_fractions": self.violations,
            "r_min": self.r_min,
            "smoothing_window": self.window,
            "warning": self.warning or None,
            "unit": "state",
        }

    def __repr__(self):
        return f"ReturnMap({self.rho.size} crossings, m={self.branch_count})"


def build_return_map(crossings, r_min: int = R_MIN, window: int = SMOOTHING_WINDOW,
                     min_points: int = MIN_POINTS) -> ReturnMap:
    """Accepts SectionCrossings, SectionPoints or a plain sequence of rho values."""
    rho = getattr(crossings, "rho", None)
    if rho is None:
        rho = [getattr(c, "rho", c) for c in crossings]
    rmap = ReturnMap(rho, r_min, window, min_points)
    if rmap.warning:
        warn(rmap.warning)
    else:
        log("ReturnMap", f"{rmap.rho.size} crossings, {rmap.branch_count} branch(es) "
                         f"(raw runs: {rmap.raw_branch_count}, merged: {rmap.merged_branch_count})")
    return rmap


class TransitionMatrix:
    def __init__(self, matrix: np.ndarray, critical_points: Sequence[float]):
        self.matrix = np.asarray(matrix, dtype=int)
        self.critical_points = list(critical_points)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    def to_dict(self) -> dict:
        return {"m": self.m, "critical_points": self.critical_points, "matrix": self.matrix.tolist(),
                "unit": "dimensionless"}

    def __repr__(self):
        return f"TransitionMatrix({self.matrix.tolist()})"


def transition_matrix(rmap: ReturnMap) -> TransitionMatrix:
    """Gamma[i][j] = 1 iff some consecutive symbol pair (i, j) occurs."""
    if not rmap.partitioned:
        raise ValueError("return map is not partitioned; transition matrix needs a branch partition")
    gamma = np.zeros((rmap.branch_count, rmap.branch_count), dtype=int)
    s = rmap.symbols
    if s.size > 1:
        gamma[s[:-1], s[1:]] = 1
    return TransitionMatrix(gamma, rmap.critical_points)
