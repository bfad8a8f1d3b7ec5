"""Fluid limit, fixed points, closed-form bounds and the discrete chain."""

from .discrete import ChainResult, RatioState, discrete_vs_fluid, simulate_chain
from .fixedpoint import (FixedPointProfile, fixed_point_profile, h_star,
                         one_hop_asymptote, proportional_fixed_point_T,
                         solve_TF, steady_tail, theorem1_bound)
from .fluid import (FluidState, FluidStepError, FluidTrajectory,
                    MonotonicityReport, fluid_integrate, monotonicity_check,
                    proportional_fluid_integrate, q_series_profile,
                    round1_closed_form)

__all__ = [
    "ChainResult", "RatioState", "discrete_vs_fluid", "simulate_chain",
    "FixedPointProfile", "fixed_point_profile", "h_star", "one_hop_asymptote",
    "proportional_fixed_point_T", "solve_TF", "steady_tail", "theorem1_bound",
    "FluidState", "FluidStepError", "FluidTrajectory", "MonotonicityReport",
    "fluid_integrate", "monotonicity_check", "proportional_fluid_integrate",
    "q_series_profile", "round1_closed_form",
]
