"""Exact solutions of n-dimensional turbulent-cascade Fokker-Planck equations."""

from .coeffs import DEGENERATE, ISOTROPIC, CoefficientSpec, IntegratedCoefficients, integrate_coefficients, map_coefficients
from .expr import parse_expression
from .solvers import (
    GeneralExpression,
    HarmonicMonomial,
    HarmonicSeries,
    LogNormalDensity,
    RadialPower,
    SolveOptions,
    evaluate_field,
    solve,
    solve_degenerate,
    solve_isotropic,
    solve_isotropic_n3,
)

__all__ = [
    "DEGENERATE",
    "ISOTROPIC",
    "CoefficientSpec",
    "GeneralExpression",
    "HarmonicMonomial",
    "HarmonicSeries",
    "IntegratedCoefficients",
    "LogNormalDensity",
    "RadialPower",
    "SolveOptions",
    "evaluate_field",
    "integrate_coefficients",
    "map_coefficients",
    "parse_expression",
    "solve",
    "solve_degenerate",
    "solve_isotropic",
    "solve_isotropic_n3",
]

__version__ = "0.1.0"
