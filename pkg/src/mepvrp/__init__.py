"""Hybrid genetic search for vehicle routing, plus tooling for evolving its operators."""

from .cost import CostEvaluator, RouteStats, simulate_route
from .generate import GeneratorSpec, generate_instance
from .hgs import SolveParams, SolveResult, solve
from .instance import ProblemData, validate
from .rng import RandomNumberGenerator
from .solution import Route, Solution, broken_pairs_distance, make_random

__all__ = [
    "CostEvaluator",
    "GeneratorSpec",
    "ProblemData",
    "RandomNumberGenerator",
    "Route",
    "RouteStats",
    "Solution",
    "SolveParams",
    "SolveResult",
    "broken_pairs_distance",
    "generate_instance",
    "make_random",
    "simulate_route",
    "solve",
    "validate",
]
