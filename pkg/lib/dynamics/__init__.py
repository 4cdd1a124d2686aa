from lib.dynamics.integrate import Trajectory, integrate, rk4_reference
from lib.dynamics.fixed_points import FixedPoint, find_fixed_points, classify_fp_shape, classify_eigenvalues
from lib.dynamics.wrapping import WrappingReport, wrapping_number, audit_wrapping
