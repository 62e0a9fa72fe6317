"""Finite-difference residuals of the evolution equations.

``residual_check`` differentiates a black-box evaluator ``P(lam, points)``
with centred stencils and reports ``dP/dlam - RHS``.  The right-hand side is
assembled from the mapped coefficients; ``divergence_form_rhs`` builds the
original Fokker-Planck form from the drift vector and diffusion tensor so
the coefficient map can be checked independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..coeffs import ISOTROPIC, CoefficientSpec, IntegratedCoefficients, map_coefficients
from ..errors import DomainError

Evaluator = Callable[[float, np.ndarray], np.ndarray]


def _stencil(v: np.ndarray, h: float):
    """Centred-difference stencil points around ``v`` and a function turning values into derivatives."""
    n = len(v)
    pts = [v]
    idx = {}
    eye = np.eye(n)
    for i in range(n):
        for s in (1, -1):
            idx[(i, s)] = len(pts)
            pts.append(v + s * h * eye[i])
    for i in range(n):
        for j in range(i + 1, n):
            for si in (1, -1):
                for sj in (1, -1):
                    idx[(i, si, j, sj)] = len(pts)
                    pts.append(v + h * (si * eye[i] + sj * eye[j]))

    def derivatives(vals):
        f0 = vals[0]
        grad = np.array([(vals[idx[(i, 1)]] - vals[idx[(i, -1)]]) / (2 * h) for i in range(n)])
        hess = np.zeros((n, n))
        for i in range(n):
            hess[i, i] = (vals[idx[(i, 1)]] - 2 * f0 + vals[idx[(i, -1)]]) / (h * h)
            for j in range(i + 1, n):
                hess[i, j] = hess[j, i] = (
                    vals[idx[(i, 1, j, 1)]] - vals[idx[(i, 1, j, -1)]]
                    - vals[idx[(i, -1, j, 1)]] + vals[idx[(i, -1, j, -1)]]
                ) / (4 * h * h)
        return f0, grad, hess

    return np.array(pts), derivatives


def reduced_rhs(variant: str, b0: float, b1: float, c: float, v, f0, grad, hess) -> float:
    """``b0 P + b1 v.grad P + c |v|^2 Lap P`` (isotropic) or ``... + c (v.grad)^2 P`` (degenerate)."""
    v = np.asarray(v, dtype=float)
    euler = v @ grad
    if variant == ISOTROPIC:
        second = (v @ v) * np.trace(hess)
    else:
        second = v @ hess @ v + euler
    return b0 * f0 + b1 * euler + c * second


@dataclass
class ResidualReport:
    lambdas: np.ndarray
    points: np.ndarray
    residual: np.ndarray
    max_abs: float
    rms: float
    steps: list[tuple[float, float]]
    max_by_step: list[float]
    order: float
    scale: float = 1.0
    extra: dict = field(default_factory=dict)

    @property
    def relative_max(self) -> float:
        return self.max_abs / self.scale if self.scale > 0 else self.max_abs


def _residuals(evaluator: Evaluator, coeffs: IntegratedCoefficients, lambdas, points, k: float, h: float):
    b0f, b1f = coeffs.b0, coeffs.b1
    out = np.empty(len(lambdas))
    scale = 0.0
    for i, (lam, v) in enumerate(zip(lambdas, points)):
        if lam - k < 0 or lam + k > coeffs.spec.lambda_max:
            raise DomainError(f"lambda stencil [{lam - k}, {lam + k}] leaves [0, lambda_max]")
        r = float(np.linalg.norm(v))
        if r == 0:
            raise DomainError("residual stencil needs points away from v = 0")
        step = h * r
        pts, deriv = _stencil(np.asarray(v, dtype=float), step)
        vals = np.asarray(evaluator(lam, pts), dtype=float)
        f0, grad, hess = deriv(vals)
        dlam = (float(evaluator(lam + k, pts[:1])[0]) - float(evaluator(lam - k, pts[:1])[0])) / (2 * k)
        rhs = reduced_rhs(coeffs.variant, float(b0f(lam)), float(b1f(lam)), float(coeffs.c(lam)), v, f0, grad, hess)
        out[i] = dlam - rhs
        scale = max(scale, abs(dlam), abs(f0))
    return out, scale


def residual_check(evaluator: Evaluator, coeffs: IntegratedCoefficients, lambdas, points,
                   lam_step: float = 2e-2, v_step: float = 2e-2, levels: int = 3) -> ResidualReport:
    """Residual of ``P`` at paired samples ``(lambdas[i], points[i])``.

    Steps are halved ``levels - 1`` times; the spatial step is relative to
    ``|v|``.  ``order`` is ``log2`` of the ratio of the last two maximum
    residuals, so a consistent solution shows ~2 and a wrong one ~0.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    points = np.asarray(points, dtype=float).reshape(len(lambdas), -1)
    steps, maxima = [], []
    res, scale = None, 1.0
    for j in range(levels):
        k, h = lam_step / 2**j, v_step / 2**j
        res, scale = _residuals(evaluator, coeffs, lambdas, points, k, h)
        steps.append((k, h))
        maxima.append(float(np.max(np.abs(res))) if res.size else 0.0)
    if len(maxima) >= 2 and maxima[-1] > 0 and maxima[-2] > 0:
        order = math.log2(maxima[-2] / maxima[-1])
    else:
        order = float("nan")
    return ResidualReport(lambdas, points, res, maxima[-1], float(np.sqrt(np.mean(res**2))) if res.size else 0.0,
                          steps, maxima, order, scale)


def divergence_form_rhs(f: Callable, spec: CoefficientSpec, lam: float, v, h: float) -> float:
    """``-div(D1 P) + sum_ij d_i d_j (D2_ij P)`` by centred differences of the products.

    ``D1 = -a v``; ``D2 = c |v|^2 I`` (isotropic) or ``c v v^T`` (degenerate).
    """
    v = np.asarray(v, dtype=float)
    n = len(v)
    a, c = float(spec.a_at(lam)), float(spec.c_at(lam))
    eye = np.eye(n)

    def flux(i, x):
        return -a * x[i] * f(x)

    def tensor(i, j, x):
        if spec.variant == ISOTROPIC:
            return c * (x @ x) * f(x) if i == j else 0.0
        return c * x[i] * x[j] * f(x)

    total = 0.0
    for i in range(n):
        total -= (flux(i, v + h * eye[i]) - flux(i, v - h * eye[i])) / (2 * h)
    for i in range(n):
        for j in range(n):
            if i == j:
                total += (tensor(i, i, v + h * eye[i]) - 2 * tensor(i, i, v) + tensor(i, i, v - h * eye[i])) / h**2
            else:
                ei, ej = eye[i], eye[j]
                total += (tensor(i, j, v + h * (ei + ej)) - tensor(i, j, v + h * (ei - ej))
                          - tensor(i, j, v + h * (ej - ei)) + tensor(i, j, v - h * (ei + ej))) / (4 * h * h)
    return float(total)


def mapped_rhs(f: Callable, spec: CoefficientSpec, lam: float, v, h: float) -> float:
    """Right-hand side of the reduced equation with ``(b0, b1, c)`` from :func:`map_coefficients`."""
    b0, b1 = map_coefficients(spec)
    v = np.asarray(v, dtype=float)
    pts, deriv = _stencil(v, h)
    vals = np.array([f(p) for p in pts])
    f0, grad, hess = deriv(vals)
    return float(reduced_rhs(spec.variant, float(b0(lam)), float(b1(lam)), float(spec.c_at(lam)), v, f0, grad, hess))
