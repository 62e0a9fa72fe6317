"""Closed forms and quadratures used as references for the solver."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..coeffs import ISOTROPIC, IntegratedCoefficients
from ..harmonics import sphere_area
from ..solvers import LogNormalDensity


def log_shift(coeffs: IntegratedCoefficients, lam: float) -> float:
    """Total log-dilation applied to radial data: beta1, plus (n-2) gamma if isotropic."""
    beta1, gamma = coeffs.beta1(lam), coeffs.gamma(lam)
    return beta1 + ((coeffs.n - 2) * gamma if coeffs.variant == ISOTROPIC else 0.0)


def lognormal_solution(coeffs: IntegratedCoefficients, ic: LogNormalDensity, lam: float, r):
    """Exact evolved log-normal density at radii ``r``.

    In ``x = ln r`` the datum is a Gaussian times ``exp(-n x)``; averaging it
    over ``s ~ N(0, 2 gamma)`` is again Gaussian, so no quadrature is needed.
    """
    n, mu, sig2 = ic.n, ic.mu, ic.sigma**2
    beta0, gamma = coeffs.beta0(lam), coeffs.gamma(lam)
    y = np.log(np.asarray(r, dtype=float)) + log_shift(coeffs, lam)
    var = sig2 + 2.0 * gamma
    w = y - mu + n * sig2
    norm = 1.0 / (math.sqrt(2 * math.pi * var) * sphere_area(n))
    return math.exp(beta0) * norm * np.exp(-(w * w) / (2 * var) + 0.5 * n * n * sig2 - n * mu)


def exponent_identity(coeffs: IntegratedCoefficients, lam: float) -> float:
    """Mass exponent ``beta0 - n shift + n^2 gamma``; zero when total mass is conserved."""
    n = coeffs.n
    return coeffs.beta0(lam) - n * log_shift(coeffs, lam) + n * n * coeffs.gamma(lam)


def radial_moment(profile: Callable, n: int, q: float = 0.0, x_range=(-30.0, 30.0), h: float = 0.01) -> float:
    """``int |v|^q P d^n v`` for a radial ``P`` given by its profile ``P(r)``.

    Integrates ``|S^{n-1}| e^{(q+n) x} P(e^x)`` over ``x = ln r`` with the
    trapezoid rule, which converges geometrically for the smooth, rapidly
    decaying integrands produced by log-normal data.
    """
    x = np.arange(x_range[0], x_range[1] + 0.5 * h, h)
    vals = np.exp((q + n) * x) * np.asarray(profile(np.exp(x)), dtype=float)
    return float(sphere_area(n) * h * (np.sum(vals) - 0.5 * (vals[0] + vals[-1])))
