"""Characteristic-coordinate solver for u_tt - c(u)(c(u)u_x)_x = 0."""

__version__ = "0.1.0"

from .expr import ScalarFunction, eval_with_derivatives, parse_scalar_function
from .model import (InitialData, LatticeSpec, SolutionGrid, WaveSpeed,
                    validate_initial_data, validate_wave_speed)
from .boundary import (BoundaryData, ExpressionProfile, boundary_from_profile,
                       boundary_transverse_derivatives, build_boundary_data,
                       compatibility_residuals)
from .goursat import consistency_residuals, richardson_order, solve_goursat
from .reconstruct import TimeSlice, energy, extract_time_slice, lambda_map
from .singular import (SingularSet, degeneracy_residuals, detect_singular_set,
                       image_curves)
from .perturb import engineered_base, jacobian_check, make_family
from .relabel import graph_distance, relabel_boundary
from .sweep import InitialDataFamily, ProfileFamily, SweepReport, sweep_lambda
