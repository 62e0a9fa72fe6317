"""Problem definition, coefficient maps and integrated coefficients.

Both problems share the drift ``D1 = -a(lambda) v``.  They differ in the
diffusion tensor, ``c(lambda) |v|^2 I`` (isotropic) or ``c(lambda) v v^T``
(degenerate), which after expanding the Fokker-Planck operator gives

    isotropic:  b0 = n (a + 2c),           b1 = a + 4c,        c |v|^2 Laplacian
    degenerate: b0 = n a + (n^2 + n) c,     b1 = a + (2n + 1) c, c (v . grad)^2
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import EvaluationError, QuadratureError, SpecError
from .expr import Expression, constant, parse_expression

ISOTROPIC = "isotropic"
DEGENERATE = "degenerate"
VARIANTS = (ISOTROPIC, DEGENERATE)

DEFAULT_QUAD_TOL = 1e-10
POSITIVITY_UNIFORM_SAMPLES = 256
POSITIVITY_GL_NODES = 64


def _as_expression(value) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, (int, float)):
        return constant(value)
    return parse_expression(str(value))


def _evaluate(expr: Expression, lam):
    out = expr.evaluate({"lambda": lam})
    return np.broadcast_to(out, np.shape(lam)).astype(float) if np.ndim(lam) else float(out)


@dataclass(frozen=True)
class CoefficientSpec:
    """Drift/diffusion coefficients ``a(lambda)``, ``c(lambda)`` and problem shape.

    ``a`` and ``c`` accept an :class:`Expression`, a source string or a
    number.  Positivity of both coefficients on ``[0, lambda_max]`` is
    checked on construction.
    """

    a: Expression
    c: Expression
    n: int
    variant: str
    lambda_max: float

    def __post_init__(self):
        object.__setattr__(self, "a", _as_expression(self.a))
        object.__setattr__(self, "c", _as_expression(self.c))
        if self.variant not in VARIANTS:
            raise SpecError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if int(self.n) != self.n or self.n < 1:
            raise SpecError(f"dimension n must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if not (np.isfinite(self.lambda_max) and self.lambda_max > 0):
            raise SpecError(f"lambda_max must be positive and finite, got {self.lambda_max!r}")
        object.__setattr__(self, "lambda_max", float(self.lambda_max))
        for name in ("a", "c"):
            free = getattr(self, name).variables() - {"lambda"}
            if free:
                raise SpecError(f"coefficient {name} uses unknown variables {sorted(free)}", name)
        check_positivity(self)

    def a_at(self, lam):
        return _evaluate(self.a, lam)

    def c_at(self, lam):
        return _evaluate(self.c, lam)


def positivity_samples(lambda_max: float) -> np.ndarray:
    nodes, _ = np.polynomial.legendre.leggauss(POSITIVITY_GL_NODES)
    gl = 0.5 * lambda_max * (nodes + 1.0)
    uniform = np.linspace(0.0, lambda_max, POSITIVITY_UNIFORM_SAMPLES)
    return np.sort(np.concatenate([uniform, gl]))


def check_positivity(spec: CoefficientSpec) -> None:
    """Raise :class:`SpecError` naming the first sample where a or c is not positive."""
    lam = positivity_samples(spec.lambda_max)
    for name in ("a", "c"):
        try:
            values = _evaluate(getattr(spec, name), lam)
        except EvaluationError as exc:
            raise SpecError(f"coefficient {name} cannot be evaluated on [0, lambda_max]: {exc}", name) from exc
        bad = np.flatnonzero(~(values > 0))
        if bad.size:
            i = bad[0]
            raise SpecError(
                f"coefficient {name}(lambda) must be positive: {name}({float(lam[i])!r}) = {float(values[i])!r}", name
            )


def map_coefficients(spec: CoefficientSpec) -> tuple[Callable, Callable]:
    """Return ``(b0, b1)`` for the configured variant; ``c`` passes through unchanged."""
    n = spec.n
    if spec.variant == ISOTROPIC:
        def b0(lam):
            return n * (spec.a_at(lam) + 2.0 * spec.c_at(lam))

        def b1(lam):
            return spec.a_at(lam) + 4.0 * spec.c_at(lam)
    else:
        def b0(lam):
            return n * spec.a_at(lam) + (n * n + n) * spec.c_at(lam)

        def b1(lam):
            return spec.a_at(lam) + (2 * n + 1) * spec.c_at(lam)
    return b0, b1


def _quad(func: Callable[[float], float], upper: float, tol: float) -> float:
    if upper == 0.0:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err, info = integrate.quad(func, 0.0, upper, epsabs=tol, epsrel=0.0, limit=200, full_output=1)[:3]
    if not np.isfinite(value) or err > tol:
        raise QuadratureError(f"adaptive quadrature on [0, {upper!r}] did not reach tolerance {tol:.1e}", err)
    return float(value)


class _CachedIntegral:
    """``lambda -> int_0^lambda f`` with a per-lambda memo.

    Each value is integrated directly from 0 so results never depend on call
    order; the lock keeps concurrent readers consistent.
    """

    def __init__(self, func: Callable, tol: float, lambda_max: float):
        self.func = func
        self.tol = tol
        self.lambda_max = lambda_max
        self._cache: dict[float, float] = {}
        self._lock = threading.Lock()

    def _one(self, lam: float) -> float:
        lam = float(lam)
        with self._lock:
            hit = self._cache.get(lam)
        if hit is not None:
            return hit
        if lam < 0 or lam > self.lambda_max * (1 + 1e-12):
            raise SpecError(f"lambda={lam!r} outside [0, lambda_max={self.lambda_max!r}]")
        value = _quad(lambda s: float(self.func(s)), lam, self.tol)
        with self._lock:
            self._cache[lam] = value
        return value

    def __call__(self, lam):
        if np.ndim(lam) == 0:
            return self._one(lam)
        lam = np.asarray(lam, dtype=float)
        return np.array([self._one(x) for x in lam.ravel()]).reshape(lam.shape)


@dataclass
class IntegratedCoefficients:
    """Integrals ``beta0``, ``beta1``, ``gamma`` of ``b0``, ``b1``, ``c`` over ``[0, lambda]``.

    ``alpha`` (the integral of ``a``) is carried as well; the Monte-Carlo
    oracle needs it for exact log-space path updates.
    """

    spec: CoefficientSpec
    quad_tol: float = DEFAULT_QUAD_TOL
    b0: Callable = field(init=False, repr=False)
    b1: Callable = field(init=False, repr=False)

    def __post_init__(self):
        if not self.quad_tol > 0:
            raise SpecError(f"quad_tol must be positive, got {self.quad_tol!r}")
        self.b0, self.b1 = map_coefficients(self.spec)
        lm = self.spec.lambda_max
        self.beta0 = _CachedIntegral(self.b0, self.quad_tol, lm)
        self.beta1 = _CachedIntegral(self.b1, self.quad_tol, lm)
        self.gamma = _CachedIntegral(self.spec.c_at, self.quad_tol, lm)
        self.alpha = _CachedIntegral(self.spec.a_at, self.quad_tol, lm)

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def variant(self) -> str:
        return self.spec.variant

    def c(self, lam):
        return self.spec.c_at(lam)

    def at(self, lam: float) -> tuple[float, float, float]:
        """``(beta0, beta1, gamma)`` at ``lam``."""
        return self.beta0(lam), self.beta1(lam), self.gamma(lam)


def integrate_coefficients(spec: CoefficientSpec, quad_tol: float = DEFAULT_QUAD_TOL) -> IntegratedCoefficients:
    return IntegratedCoefficients(spec, quad_tol)
