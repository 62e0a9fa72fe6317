"""Operator actions the exact solutions are assembled from.

* ``exp(beta v.grad)`` is a dilation, ``f(v) -> f(v e^beta)``.
* ``exp(gamma (v.grad)^2)`` is a heat semigroup in ``ln|v|``: a Gaussian
  average of ``f(v e^s)`` over ``s ~ N(0, 2 gamma)``.
* ``exp(tau |v|^2 Laplacian)`` splits into the same Gaussian average with an
  extra shift ``(n - 2) tau`` times ``exp(tau Lambda)`` on the sphere, which
  acts on a degree-``l`` harmonic as ``exp(tau * (-l (l + n - 2)))``.

Gaussian averages use Gauss-Hermite quadrature after ``s = 2 sqrt(gamma) u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import EvaluationError
from .harmonics import eigenvalue

DEFAULT_GH_NODES = 64
GAMMA_EPS = 1e-13
SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True, eq=False)
class GaussHermiteRule:
    """Nodes and weights for ``int f(u) exp(-u^2) du`` on the real line."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def m(self) -> int:
        return len(self.nodes)

    @property
    def u_max(self) -> float:
        return float(np.max(np.abs(self.nodes)))


@lru_cache(maxsize=16)
def gauss_hermite(m: int = DEFAULT_GH_NODES) -> GaussHermiteRule:
    if m < 1:
        raise ValueError(f"Gauss-Hermite rule needs m >= 1, got {m}")
    u, w = np.polynomial.hermite.hermgauss(m)
    u.setflags(write=False)
    w.setflags(write=False)
    return GaussHermiteRule(u, w)


def dilate(f: Callable, beta: float) -> Callable:
    """Return ``v -> f(v * exp(beta))``."""
    scale = math.exp(beta)

    def dilated(v):
        return f(np.asarray(v, dtype=float) * scale)

    return dilated


def _log_factors(gamma: float, shift: float, rule: GaussHermiteRule, sign: int = 1) -> np.ndarray:
    return np.exp(shift + sign * 2.0 * math.sqrt(gamma) * rule.nodes)


def gaussian_log_average(f: Callable, gamma: float, shift: float, rule: GaussHermiteRule, v):
    """``(4 pi gamma)^(-1/2) int exp(-s^2 / (4 gamma)) f(v e^(shift + s)) ds``.

    ``v`` is anything ``f`` accepts after scalar scaling: a Cartesian array
    with the coordinate axis last, or an array of radii for a radial ``f``.
    For ``gamma <= 1e-13`` the kernel is treated as a delta.
    """
    if gamma < 0:
        raise EvaluationError(f"Gaussian kernel needs gamma >= 0, got {gamma!r}")
    v = np.asarray(v, dtype=float)
    if gamma <= GAMMA_EPS:
        out = np.asarray(f(v * math.exp(shift)), dtype=float)
        if not np.all(np.isfinite(out)):
            raise EvaluationError("non-finite initial-condition value")
        return out
    return _average(f, _log_factors(gamma, shift, rule), rule.weights, v)


def _average(f: Callable, factors: np.ndarray, weights: np.ndarray, v: np.ndarray):
    scaled = factors.reshape((-1,) + (1,) * v.ndim) * v
    vals = np.asarray(f(scaled), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = int(np.sum(~np.isfinite(vals)))
        raise EvaluationError(f"initial condition is non-finite at {bad} Gauss-Hermite node(s)")
    return np.tensordot(weights, vals, axes=(0, 0)) / SQRT_PI


def gaussian_log_average_reflected(f: Callable, gamma: float, shift: float, rule: GaussHermiteRule, v):
    """Same average with ``s -> -s``; equal to :func:`gaussian_log_average` since the kernel is even."""
    v = np.asarray(v, dtype=float)
    if gamma <= GAMMA_EPS:
        return gaussian_log_average(f, gamma, shift, rule, v)
    return _average(f, _log_factors(gamma, shift, rule, sign=-1), rule.weights, v)


def log_average_operator(gamma: float, shift: float, rule: GaussHermiteRule) -> Callable[[Callable], Callable]:
    """Curried form: ``op(f)`` is the function ``v -> gaussian_log_average(f, gamma, shift, rule, v)``."""

    def op(f):
        return lambda v: gaussian_log_average(f, gamma, shift, rule, v)

    return op


def heat_on_sphere_factor(l: int, n: int, gamma: float, sign: int = 1) -> float:
    """Multiplier of ``exp(gamma Lambda)`` on degree-``l`` harmonics: ``exp(-gamma l (l + n - 2))``.

    ``sign=-1`` gives the reciprocal factor; it exists only so the residual
    oracle can demonstrate that this choice does not solve the equation.
    """
    if gamma < 0:
        raise EvaluationError(f"gamma must be >= 0, got {gamma!r}")
    if l == 0:
        return 1.0
    return math.exp(sign * gamma * eigenvalue(l, n))
