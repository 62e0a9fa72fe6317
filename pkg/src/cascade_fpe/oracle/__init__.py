"""Independent checks of the closed-form solutions."""

from .dimension import harmonic_dimension
from .exact import exponent_identity, lognormal_solution, radial_moment
from .mol import LogGrid, compare_with_exact, mol_reference
from .montecarlo import MCEstimate, mc_simulate
from .residual import ResidualReport, divergence_form_rhs, mapped_rhs, residual_check

__all__ = [
    "LogGrid",
    "MCEstimate",
    "ResidualReport",
    "compare_with_exact",
    "divergence_form_rhs",
    "exponent_identity",
    "harmonic_dimension",
    "lognormal_solution",
    "mapped_rhs",
    "mc_simulate",
    "mol_reference",
    "radial_moment",
    "residual_check",
]
