"""Energy minimization by successive convex approximation."""

from .barrier import Bordered, barrier_minimize, path_following, project_box_halfspace, projected_gradient
from .inner import InnerProblem, make_state, phase1, solve_fixed_rho, solve_inner
from .loop import (
    MODES,
    DiminishingSteps,
    Problem,
    SolveResult,
    baseline,
    harmonic_steps,
    optimize,
    fixed_rho_point,
    sca_loop,
    sca_point,
)
from .surrogates import SurrogateState, surrogate_energy, surrogate_exponent

__all__ = [
    "Bordered", "barrier_minimize", "path_following", "project_box_halfspace",
    "projected_gradient", "InnerProblem", "make_state", "phase1", "solve_fixed_rho",
    "solve_inner", "MODES", "DiminishingSteps", "Problem", "SolveResult", "baseline",
    "harmonic_steps", "optimize", "fixed_rho_point", "sca_loop", "sca_point", "SurrogateState", "surrogate_energy",
    "surrogate_exponent",
]
