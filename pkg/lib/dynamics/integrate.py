from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from lib.errors import InputFileError, NumericalFailure
from lib.interface.console import log, warn

DIVERGENCE_NORM = 1e6
RTOL = 1e-9
ATOL = 1e-10
METHODS = ("RK45", "DOP853")


class Trajectory:
    """Uniformly resampled solution curve; `states[i]` is the state at `t[i]`."""

    def __init__(self, t, states, dt_output: float, t0: float = 0.0, method: str = "RK45",
                 rtol: float = RTOL, atol: float = ATOL, diverged: bool = False, message: str = ""):
        self.t = np.asarray(t, dtype=float)
        self.states = np.asarray(states, dtype=float).reshape(-1, 3)
        if self.t.shape[0] != self.states.shape[0]:
            raise ValueError(f"{self.t.shape[0]} times for {self.states.shape[0]} states")
        self.dt_output = float(dt_output)
        self.t0 = float(t0)
        self.method = method
        self.rtol = rtol
        self.atol = atol
        self.diverged = diverged
        self.message = message

    def __len__(self):
        return self.t.shape[0]

    def __repr__(self):
        span = f"{self.t[0]:g}..{self.t[-1]:g}" if len(self) else "empty"
        flag = ", diverged" if self.diverged else ""
        return f"Trajectory({len(self)} samples, t={span}, dt={self.dt_output:g}{flag})"

    @property
    def metadata(self) -> dict:
        return {"method": self.method, "rtol": self.rtol, "atol": self.atol,
                "dt_output": self.dt_output, "t0": self.t0, "diverged": self.diverged}

    def bounds(self, margin: float = 0.0) -> np.ndarray:
        """(3, 2) array of [min, max] per axis, each side inflated by `margin` times the extent."""
        if not len(self):
            return np.full((3, 2), np.nan)
        lo =self.states.min(axis=0)
        hi = self.states.max(axis=0)
        pad = (hi - lo) * margin
        return np.column_stack([lo - pad, hi + pad])

    def centroid(self) -> np.ndarray:
        if not len(self):
            return np.full(3, np.nan)
        return self.states.mean(axis=0)

    def interpolant(self, f=None, params: Optional[Mapping[str, float]] = None):
        """
        Dense interpolation of the stored samples. With the field available the
        derivatives at the knots are exact and a cubic Hermite spline is used.
        """
        if f is not None:
            slopes = f.evaluate_many(self.states, params)
            return CubicHermiteSpline(self.t, self.states, slopes, axis=0)
        return CubicSpline(self.t, self.states, axis=0)

    def to_csv(self, path: str):
        from lib.interface.io import write_csv
        write_csv(path, ["t", "x", "y", "z"], np.column_stack([self.t, self.states]))

    @classmethod
    def from_csv(cls, path: str) -> "Trajectory":
        from lib.interface.io import read_csv
        data = read_csv(path, ["t", "x", "y", "z"])
        t = data[:, 0]
        if t.shape[0] > 1 and np.any(np.diff(t) <= 0):
            raise InputFileError(f"{path}: times are not strictly increasing")
        dt = float(np.median(np.diff(t))) if t.shape[0] > 1 else 0.0
        return cls(t, data[:, 1:4], dt, t0=float(t[0]) if t.shape[0] else 0.0, method="file")


def rk4_reference(f, params: Mapping[str, float], ic: Sequence[float], t_end: float, dt: float) -> Trajectory:
    """Classical fixed-step Runge-Kutta 4, the fourth-order yardstick for the adaptive methods."""
    if dt <= 0 or t_end <= 0:
        raise ValueError(f"need positive t_end and dt, got t_end={t_end}, dt={dt}")
    rhs = f.rhs(params)
    n = int(round(t_end / dt))
    t = dt * np.arange(n + 1)
    states = np.empty((n + 1, 3))
    states[0] = np.asarray(ic, dtype=float)
    for k in range(n):
        x, tk = states[k], t[k]
        k1 = rhs(tk, x)
        k2 = rhs(tk + dt / 2, x + dt / 2 * k1)
        k3 = rhs(tk + dt / 2, x + dt / 2 * k2)
        k4 = rhs(tk + dt, x + dt * k3)
        states[k + 1] = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return Trajectory(t, states, dt, method="RK4", rtol=0.0, atol=0.0)


def _divergence_event(t, state):
    return np.linalg.norm(state) - DIVERGENCE_NORM


_divergence_event.terminal = True
_divergence_event.direction = 1


def integrate(f, params: Mapping[str, float], ic: Sequence[float], t_end: float, dt_output: float = 0.01,
              transient: float = 0.0, method: str = "RK45", rtol: float = RTOL, atol: float = ATOL) -> Trajectory:
    """
    Integrate X' = F(X) from `ic` at t = 0 and sample every `dt_output` on [transient, t_end].
    Diverging solutions (|X| > 1e6) are truncated and flagged rather than raised.
    """
    if dt_output <= 0:
        raise ValueError(f"dt_output must be positive, got {dt_output}")
    if transient < 0 or t_end <= transient:
        raise ValueError(f"need t_end > transient >= 0, got t_end={t_end}, transient={transient}")
    if method not in METHODS:
        raise ValueError(f"unknown integration method '{method}' (use one of {', '.join(METHODS)})")
    ic = np.asarray(ic, dtype=float)
    if ic.shape != (3,) or not np.all(np.isfinite(ic)):
        raise ValueError(f"initial condition must be 3 finite numbers, got {ic.tolist()}")

    n = int(np.floor((t_end - transient) / dt_output + 1e-9))
    t_eval = transient + dt_output * np.arange(n + 1)

    log("Integrate", f"{method} t=[0, {t_eval[-1]:g}] dt={dt_output:g} transient={transient:g}")
    result = solve_ivp(f.rhs(params), (0.0, t_eval[-1]), ic, method=method, t_eval=t_eval,
                       rtol=rtol, atol=atol, events=_divergence_event)

    if result.status == -1:
        raise NumericalFailure(f"integration failed: {result.message}")
    diverged = result.status == 1
    if diverged:
        t_stop = result.t_events[0][0] if len(result.t_events[0]) else float("nan")
        warn(f"trajectory diverged (|X| > {DIVERGENCE_NORM:g}) at t={t_stop:g}; truncated")

    # nothing is sampled when the solution blows up before `transient`
    t = np.asarray(result.t, dtype=float)
    states = np.asarray(result.y, dtype=float).reshape(3, -1).T if t.size else np.empty((0, 3))
    return Trajectory(t, states, dt_output, t0=transient, method=method, rtol=rtol, atol=atol,
                      diverged=diverged, message=result.message)
