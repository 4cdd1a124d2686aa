"""Sign-change detection on sampled signals and root refinement on a dense interpolant."""
from typing import Callable

import numpy as np
from scipy.optimize import brentq

XTOL = 1e-15


def sign_change_brackets(values: np.ndarray, direction: int = 0) -> np.ndarray:
    """
    Indices k such that values[k] and values[k + 1] bracket a zero.
    direction > 0 keeps -/+ changes, direction < 0 keeps +/- changes, 0 keeps both.
    A sample that is exactly zero counts as positive.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 2:
        return np.empty(0, dtype=int)
    positive = values >= 0
    up = ~positive[:-1] & positive[1:]
    down = positive[:-1] & ~positive[1:]
    if direction > 0:
        mask = up
    elif direction < 0:
        mask = down
    else:
        mask = up | down
    return np.flatnonzero(mask)


def refine_root(g: Callable[[float], float], a: float, b: float) -> float:
    """Bracketed root of g on [a, b] (Brent: bisection + secant + inverse quadratic)."""
    ga, gb = g(a), g(b)
    if ga == 0.0:
        return a
    if gb == 0.0:
        return b
    if np.sign(ga) == np.sign(gb):
        # the bracket was found on samples and lost to interpolation rounding
        return a if abs(ga) <= abs(gb) else b
    return brentq(g, a, b, xtol=XTOL, rtol=4 * np.finfo(float).eps, maxiter=200)
