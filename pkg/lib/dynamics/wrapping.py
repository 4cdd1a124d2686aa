from typing import List, Optional

import numpy as np

from lib.dynamics.fixed_points import FixedPoint, inner_and_outer
from lib.interface.console import log, warn

W_RELATIVE_TOLERANCE = 0.05
W_ABSOLUTE_TOLERANCE = 0.05
COINCIDENT_DISTANCE = 1e-12


class WrappingReport:
    """W = |omega / lambda_3| * |F_+ - F_-|, from the outer fixed point's spectrum."""

    def __init__(self, omega=None, lambda3=None, distance=None, w=None, defined=False, reason=""):
        self.omega = omega
        self.lambda3 = lambda3
        self.distance = distance
        self.w = w
        self.defined = defined
        self.reason = reason

    def to_dict(self) -> dict:
        return {
            "defined": self.defined,
            "reason": self.reason or None,
            "omega": {"value": self.omega, "unit": "rad/time"},
            "lambda3": {"value": self.lambda3, "unit": "1/time"},
            "distance": {"value": self.distance, "unit": "state"},
            "w": {"value": self.w, "unit": "dimensionless"},
        }

    def __repr__(self):
        if not self.defined:
            return f"WrappingReport(undefined: {self.reason})"
        if self.omega is None:
            return f"WrappingReport(W={self.w:.4g}, D={self.distance:.4g}, {self.reason})"
        return f"WrappingReport(W={self.w:.4g}, omega={self.omega:.4g}, lambda3={self.lambda3:.4g}, D={self.distance:.4g})"


def wrapping_number(fps: List[FixedPoint]) -> WrappingReport:
    if len(fps) != 2:
        return WrappingReport(reason=f"needs exactly 2 fixed points, got {len(fps)}")
    distance = float(np.linalg.norm(fps[1].location - fps[0].location))
    if distance <= COINCIDENT_DISTANCE:
        # W = 0 when D = 0, whatever the spectra
        return WrappingReport(distance=distance, w=0.0, defined=True, reason="coincident fixed points")
    inner, outer = inner_and_outer(fps)
    if inner is None or outer is None:
        return WrappingReport(distance=distance, reason="could not tell the inner fixed point from the outer one")
    pair = outer.complex_pair()
    if pair is None:
        return WrappingReport(distance=distance, reason="outer fixed point has no complex-conjugate pair")
    complex_eig, lambda3 = pair
    omega = float(abs(complex_eig.imag))
    if lambda3 == 0.0:
        return WrappingReport(omega=omega, lambda3=0.0, distance=distance,
                              reason="outer fixed point has a zero real eigenvalue")
    w = abs(omega / lambda3) * distance
    return WrappingReport(omega=omega, lambda3=float(lambda3), distance=distance, w=float(w), defined=True)


def audit_wrapping(report: WrappingReport, reference: Optional[float], fps: List[FixedPoint],
                   name: str = "") -> dict:
    """Compare W with a reference value; on mismatch the eigenvalues are logged and returned for audit."""
    audit = {"reference": reference, "computed": report.w, "match": None, "eigenvalues": None}
    if reference is None or not report.defined:
        return audit
    tolerance = max(W_RELATIVE_TOLERANCE * abs(reference), W_ABSOLUTE_TOLERANCE)
    audit["tolerance"] = tolerance
    audit["match"] = bool(abs(report.w - reference) <= tolerance)
    if audit["match"]:
        log("Wrapping", f"{name} W={report.w:.3f} (reference {reference})")
    else:
        audit["eigenvalues"] = {
            p.role: [{"re": float(l.real), "im": float(l.imag)} for l in p.eigenvalues] for p in fps
        }
        warn(f"{name} W={report.w:.3f} differs from reference {reference} beyond {tolerance:.3f}; "
             f"eigenvalues: " + "; ".join(f"{p.role}: {np.round(p.eigenvalues, 6).tolist()}" for p in fps))
    return audit
