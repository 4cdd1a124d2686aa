from lib.curvature.phi import (CORE, FIELDS, CurvatureSample, PhiSymbolic, BoundPhi, phi_eval, phi_batch,
                               phi_symbolic, bind_phi, field_values)
from lib.curvature.crossings import MIN_DEPTH, CrossingEvent, crossings, counted, excursion_depths
from lib.curvature.darboux import DarbouxStats, darboux_residual, linear_darboux_defect, sample_manifold_points
