"""Linear ODE boundary value problems with measure-type boundary operators.

Solves  y' = A(t) y + f(t)  on a compact interval under a general boundary
condition  U y = c,  where U is a Stieltjes measure (point atoms plus an
integral density), builds the Green matrix of the semihomogeneous problem
from the fundamental matrix, and runs parameter sweeps that measure every
quantity relevant to solution and Green-matrix convergence as a small
parameter goes to zero.
"""

from .linalg import (abs_norm, colsum_norm, det, inverse, lu_solve,
                     SingularMatrixError)
from .ode import (CoeffFn, Interval, Matrizant, VecFn, StepUnderflowError,
                  antiderivative, cauchy_solution, inverse_matrizant, l1_norm,
                  matrizant, sup_norm, DEFAULT_TOL)
from .boundary import (BoundaryMeasure, apply, apply_to_matrix, h_transform,
                       operator_norm, strong_convergence_probe,
                       variation_distance, point_operator)
from .bvp import (BVProblem, GreenMatrix, NonUniqueError,
                  SingularBoundaryError, check_wellposed, green_apply,
                  green_matrix, solve_bvp, tabulation_grid)
from .sweep import (ConvergenceReport, FamilyScenario, class_M_diagnostic,
                    green_convergence, kiguradze_battery, levin_conditions,
                    multipoint_equivalence, run_sweep, solution_convergence,
                    DEFAULT_EPSILONS)
from .families import build_scenario, registry_list

__version__ = "0.1.0"
