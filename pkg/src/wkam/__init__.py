"""Vanishing-discount limits of Hamilton-Jacobi equations on the circle R/nZ.

Grids and grid functions (``torus_grid``), Hamiltonian models (``model``),
the semi-Lagrangian solver (``solver``), critical values (``critical``),
Mather measures, barriers and the limit selection (``mather``) and the
experiment layer (``lab``).
"""
from .critical import CriticalValue, critical_value_ergodic, critical_value_lp, find_c0
from .mather import (BarrierTable, ClosedMeasurePolytope, L4Error, L4Report, aubry_set,
                     build_polytope, check_L4, optimal_face_optimize, peierls_barrier, select_u0,
                     solve_mather_lp, verify_largest_subsolution)
from .measure import OccupationMeasure
from .model import Model, check_conditions, model_zoo
from .solver import (DiscountedSolution, SchemeParams, SolverError, backtrack_calibrated,
                     build_discounted_occupation, equibounded_band, finite_horizon_action,
                     lax_oleinik_step, solve_discounted, verify_domination)
from .torus_grid import (Grid, GridFunction, VelocityGrid, interp, lipschitz_estimate, make_grid,
                         sup_dist)

__all__ = [
    "BarrierTable", "ClosedMeasurePolytope", "CriticalValue", "DiscountedSolution", "Grid",
    "GridFunction", "L4Error", "L4Report", "Model", "OccupationMeasure", "SchemeParams",
    "SolverError", "VelocityGrid", "aubry_set", "backtrack_calibrated",
    "build_discounted_occupation", "build_polytope", "check_L4", "check_conditions",
    "critical_value_ergodic", "critical_value_lp", "equibounded_band", "find_c0",
    "finite_horizon_action", "interp", "lax_oleinik_step", "lipschitz_estimate", "make_grid",
    "model_zoo", "optimal_face_optimize", "peierls_barrier", "select_u0", "solve_discounted",
    "solve_mather_lp", "sup_dist", "verify_domination", "verify_largest_subsolution",
]
