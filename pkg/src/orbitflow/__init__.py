"""Mean curvature flow of Lie group orbits on Riemannian and Kaehler manifolds."""
from .actions import Action, Generator, fundamental_field
from .kaehler import (MomentMap, find_minimal_lagrangian, frozen_norm_law, is_lagrangian_point,
                      minimal_iff_moment_zero, moment_norm, verify_flow_moment_law,
                      verify_moment_condition)
from .manifolds import ComplexProjective, Product, RealProjective, Sphere
from .mcflow import FlowParams, FlowTrace, OrbitState, mcf, mean_curvature, vol_squared
from .numcore import StepControl, integrate
from .scenarios import get_scenario, list_scenarios

__version__ = "0.1.0"

__all__ = [
    "Action", "ComplexProjective", "FlowParams", "FlowTrace", "Generator", "MomentMap",
    "OrbitState", "Product", "RealProjective", "Sphere", "StepControl", "find_minimal_lagrangian",
    "frozen_norm_law", "fundamental_field", "get_scenario", "integrate", "is_lagrangian_point",
    "list_scenarios", "mcf", "mean_curvature", "minimal_iff_moment_zero", "moment_norm",
    "verify_flow_moment_law", "verify_moment_condition", "vol_squared",
]
