"""Method-of-lines reference integrator in log-radius.

With ``x = ln|v|`` the Euler operator ``v.grad`` becomes ``d/dx`` along a
ray, so for radial data (or a single harmonic mode ``l``) both problems
reduce to a constant-in-x equation

    dP/dlam = (b0 + c lam_l) P + (b1 + (n-2) c) P_x + c P_xx     (isotropic)
    dP/dlam =  b0 P            +  b1 P_x         + c P_xx        (degenerate)

discretised by second-order centred differences on a uniform x grid with
zero values outside the domain, and integrated with DOP853.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from ..coeffs import ISOTROPIC, IntegratedCoefficients
from ..errors import CascadeError, DomainError
from ..harmonics import eigenvalue
from ..solvers import InitialCondition, LogNormalDensity, solve


@dataclass(frozen=True)
class LogGrid:
    x_min: float
    h: float
    count: int

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.count)

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.x)

    def refined(self) -> "LogGrid":
        """Grid with half the spacing whose even nodes coincide with this grid."""
        return LogGrid(self.x_min, self.h / 2, 2 * self.count - 1)

    def widened(self, factor: float = 1.5) -> "LogGrid":
        extra = int(math.ceil((factor - 1) * (self.count - 1) / 2))
        return LogGrid(self.x_min - extra * self.h, self.h, self.count + 2 * extra)


def default_grid(coeffs: IntegratedCoefficients, ic: InitialCondition, lambda_end: float, h: float,
                 width: float = 14.0) -> LogGrid:
    """Grid covering the initial and evolved log-normal bulk with ``width`` standard deviations of margin."""
    if isinstance(ic, LogNormalDensity):
        centre0 = ic.mu - ic.n * ic.sigma**2
        gamma = coeffs.gamma(lambda_end)
        shift = coeffs.beta1(lambda_end) + ((coeffs.n - 2) * gamma if coeffs.variant == ISOTROPIC else 0.0)
        spread = math.sqrt(ic.sigma**2 + 2 * gamma)
        lo = min(centre0, centre0 - shift) - width * spread
        hi = max(centre0, centre0 - shift) + width * spread
    else:
        lo, hi = -12.0, 12.0
    count = int(math.ceil((hi - lo) / h)) + 1
    return LogGrid(lo, h, count)


class MolError(CascadeError):
    pass


@dataclass
class MolResult:
    grid: LogGrid
    values: np.ndarray
    boundary_influence: float | None
    nfev: int


def _rhs_factory(coeffs: IntegratedCoefficients, h: float, mode_l: int):
    n = coeffs.n
    iso = coeffs.variant == ISOTROPIC
    lam_l = eigenvalue(mode_l, n) if mode_l else 0

    def rhs(lam, p):
        b0, b1, c = float(coeffs.b0(lam)), float(coeffs.b1(lam)), float(coeffs.c(lam))
        zero_order = b0 + (c * lam_l if iso else 0.0)
        drift = b1 + ((n - 2) * c if iso else 0.0)
        padded = np.concatenate(([0.0], p, [0.0]))
        px = (padded[2:] - padded[:-2]) / (2 * h)
        pxx = (padded[2:] - 2 * p + padded[:-2]) / (h * h)
        return zero_order * p + drift * px + c * pxx

    return rhs


def _integrate(coeffs, p0, grid, lambda_end, mode_l, rtol, atol):
    sol = solve_ivp(_rhs_factory(coeffs, grid.h, mode_l), (0.0, lambda_end), p0,
                    method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise MolError(f"method-of-lines integration failed: {sol.message}")
    return sol.y[:, -1], sol.nfev


def mol_reference(coeffs: IntegratedCoefficients, ic: InitialCondition, lambda_end: float,
                  grid: LogGrid | None = None, h: float = 0.02, mode_l: int = 0,
                  rtol: float = 1e-10, atol: float | None = None,
                  estimate_boundary: bool = False) -> MolResult:
    """Integrate radial data (``mode_l = 0``) or one harmonic mode to ``lambda_end``.

    The initial profile is ``ic.profile`` (the radial coefficient for a
    mode).  With ``estimate_boundary`` the run is repeated on a domain 1.5x
    wider and the largest change on shared nodes is reported.
    """
    if not ic.radial:
        raise DomainError("method-of-lines reference needs radial data (or a single-mode radial profile)")
    if coeffs.variant != ISOTROPIC and mode_l:
        raise DomainError("harmonic modes only enter the isotropic problem")
    if not 0 < lambda_end <= coeffs.spec.lambda_max:
        raise DomainError(f"lambda_end={lambda_end!r} outside (0, lambda_max]")
    grid = grid or default_grid(coeffs, ic, lambda_end, h)
    p0 = np.asarray(ic.profile(grid.r), dtype=float)
    atol = atol if atol is not None else 1e-14 * max(1.0, float(np.max(np.abs(p0))))
    values, nfev = _integrate(coeffs, p0, grid, lambda_end, mode_l, rtol, atol)
    influence = None
    if estimate_boundary:
        wide = grid.widened()
        offset = int(round((grid.x_min - wide.x_min) / grid.h))
        wide_vals, _ = _integrate(coeffs, np.asarray(ic.profile(wide.r), dtype=float), wide, lambda_end,
                                  mode_l, rtol, atol)
        influence = float(np.max(np.abs(wide_vals[offset:offset + grid.count] - values)) / np.max(np.abs(values)))
    return MolResult(grid, values, influence, nfev)


def exact_on_grid(coeffs: IntegratedCoefficients, ic: InitialCondition, lambda_end: float, grid: LogGrid):
    pts = np.zeros((grid.count, coeffs.n))
    pts[:, 0] = grid.r
    return np.asarray(solve(coeffs, ic, lambda_end, pts), dtype=float)


@dataclass
class MolComparison:
    hs: list[float]
    gaps: list[float]
    orders: list[float]
    boundary_influence: float | None

    @property
    def gap(self) -> float:
        return self.gaps[-1]

    @property
    def order(self) -> float:
        return self.orders[-1] if self.orders else float("nan")


def interior_mask(exact: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Nodes where the exact field exceeds ``floor`` times its maximum."""
    return np.abs(exact) >= floor * np.max(np.abs(exact))


def compare_with_exact(coeffs: IntegratedCoefficients, ic: InitialCondition, lambda_end: float,
                       h: float = 0.02, levels: int = 2, estimate_boundary: bool = True) -> MolComparison:
    """Max gap (relative to the field maximum) between MoL and the exact solution under grid halving."""
    grid = default_grid(coeffs, ic, lambda_end, h)
    hs, gaps = [], []
    influence = None
    for j in range(levels):
        res = mol_reference(coeffs, ic, lambda_end, grid, estimate_boundary=estimate_boundary and j == 0)
        if j == 0:
            influence = res.boundary_influence
        exact = exact_on_grid(coeffs, ic, lambda_end, grid)
        mask = interior_mask(exact)
        # compare on the coarsest grid's nodes so the gap sequence is measured at fixed points
        stride = 2**j
        mask[np.arange(grid.count) % stride != 0] = False
        gaps.append(float(np.max(np.abs(res.values - exact)[mask]) / np.max(np.abs(exact))))
        hs.append(grid.h)
        grid = grid.refined()
    orders = [math.log2(gaps[i] / gaps[i + 1]) for i in range(len(gaps) - 1)]
    return MolComparison(hs, gaps, orders, influence)
