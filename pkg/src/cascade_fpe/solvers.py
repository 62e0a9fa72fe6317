"""Closed-form solutions of the two Cauchy problems.

Degenerate (diffusion ``c v v^T``)::

    P(lam, v) = exp(beta0) E_s[ phi(v exp(beta1 + s)) ],   s ~ N(0, 2 gamma)

Isotropic (diffusion ``c |v|^2 I``), mode by mode::

    P(lam, v) = exp(beta0) sum_{l,k} exp(-gamma l (l+n-2)) Y_{l,k}(v/|v|)
                E_s[ phi_{l,k}(|v| exp(beta1 + (n-2) gamma + s)) ]

with ``beta0, beta1, gamma`` the integrated coefficients.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import harmonics
from .coeffs import DEGENERATE, ISOTROPIC, IntegratedCoefficients
from .errors import CascadeError, DomainError, SpecError, TruncationError
from .expr import Expression, parse_expression
from .harmonics import HarmonicExpansion, HarmonicMode, Projector, sphere_area
from .kernels import (
    DEFAULT_GH_NODES,
    GAMMA_EPS,
    GaussHermiteRule,
    gauss_hermite,
    gaussian_log_average,
    heat_on_sphere_factor,
)

DEFAULT_L_MAX = 16
L_MAX_CAP = 64
TAIL_TOL = 1e-10
EXPONENT_BUDGET = 700.0


# -- initial conditions ------------------------------------------------------

class InitialCondition:
    """Cauchy datum ``phi(v)``; ``__call__`` takes Cartesian points (last axis = n).

    ``growth`` is a power ``p_max`` with ``|phi(v)| <= C (1 + |v|)^p_max``.
    Radial data also implement ``profile(r)``.
    """

    radial = False
    growth = 0.0

    def __call__(self, v):
        raise NotImplementedError

    def profile(self, r):
        raise DomainError(f"{type(self).__name__} is not radial")

    def expansion(self, n: int) -> HarmonicExpansion | None:
        """Exact finite harmonic expansion, or None when it must be computed numerically."""
        return None

    def describe(self) -> dict:
        raise NotImplementedError


def _norm(v):
    return np.linalg.norm(np.asarray(v, dtype=float), axis=-1)


@dataclass(frozen=True)
class RadialPower(InitialCondition):
    """``phi(v) = scale * |v|^p``."""

    p: float
    scale: float = 1.0

    radial = True

    @property
    def growth(self):
        return self.p

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return self.scale * np.power(r, self.p)

    def __call__(self, v):
        return self.profile(_norm(v))

    def describe(self):
        return {"type": "radial_power", "p": self.p, "scale": self.scale}


@dataclass(frozen=True)
class LogNormalDensity(InitialCondition):
    """Probability density on R^n whose radius ``|v|`` is log-normal(mu, sigma).

    ``phi(v) = f(|v|) / (|S^{n-1}| |v|^(n-1))`` with ``f`` the log-normal
    pdf; for n = 1 this is the even extension with total mass 1.
    """

    n: int
    mu: float = 0.0
    sigma: float = 1.0

    radial = True
    growth = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise SpecError(f"log-normal sigma must be positive, got {self.sigma!r}")

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.log(r)
            dens = np.exp(-((x - self.mu) ** 2) / (2 * self.sigma**2) - self.n * x)
        dens = np.where(r > 0, dens, 0.0)
        return dens / (self.sigma * math.sqrt(2 * math.pi) * sphere_area(self.n))

    def __call__(self, v):
        return self.profile(_norm(v))

    def moment(self, q: float) -> float:
        """``E |v|^q`` under this density."""
        return math.exp(q * self.mu + 0.5 * (q * self.sigma) ** 2)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        r = np.exp(self.mu + self.sigma * rng.standard_normal(size))
        d = rng.standard_normal((size, self.n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return r[:, None] * d

    def describe(self):
        return {"type": "lognormal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class HarmonicMonomial(InitialCondition):
    """``phi(v) = |v|^p Y_{l,k}(v/|v|)``."""

    p: float
    l: int
    k: int
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("harmonic initial data need n >= 2")
        mode = HarmonicMode(self.l, self.k, self.n)
        if self.n >= 4 and mode.k != 1:
            raise DomainError(f"n={self.n}: only zonal harmonics (k=1) are supported")

    @property
    def growth(self):
        return self.p

    @property
    def mode(self) -> HarmonicMode:
        return HarmonicMode(self.l, self.k, self.n)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            return np.power(_norm(v), self.p) * harmonics.harmonic_matrix([self.mode], v)[0]

    def expansion(self, n):
        if n != self.n:
            raise DomainError(f"initial condition built for n={self.n}, problem has n={n}")
        return HarmonicExpansion(n, (self.mode,), (lambda r: np.power(np.asarray(r, float), self.p),), self.l)

    def describe(self):
        return {"type": "harmonic_monomial", "p": self.p, "l": self.l, "k": self.k}


@dataclass(frozen=True)
class HarmonicSeries(InitialCondition):
    """Finite series ``sum g_{l,k}(|v|) Y_{l,k}`` given by an expansion."""

    series: HarmonicExpansion
    growth: float = 0.0
    label: dict | None = None

    def __post_init__(self):
        keys = [(m.l, m.k) for m in self.series.modes]
        if keys != sorted(set(keys)):
            raise SpecError("harmonic series modes must be sorted and unique by (l, k)")

    def __call__(self, v):
        return self.series(v)

    def expansion(self, n):
        if n != self.series.n:
            raise DomainError(f"series built for n={self.series.n}, problem has n={n}")
        return self.series

    def describe(self):
        return self.label or {"type": "harmonic_series", "modes": [[m.l, m.k] for m in self.series.modes]}


def expression_variables(n: int) -> tuple[str, ...]:
    names = tuple(f"v{i + 1}" for i in range(n)) + ("v",)
    if n == 2:
        names += ("theta",)
    elif n == 3:
        names += ("theta", "phi")
    return names


@dataclass(frozen=True)
class GeneralExpression(InitialCondition):
    """Arbitrary expression in ``v1..vn``, ``v = |v|`` and, for n = 3, ``theta``/``phi``.

    n = 2: ``theta = atan2(v2, v1)``.  n = 3: ``theta`` is the polar angle
    from the v3 axis, ``phi`` the azimuth.  Only n <= 3 is supported.
    """

    source: str
    n: int
    growth: float = 0.0
    radial_hint: bool = False

    def __post_init__(self):
        if not 1 <= self.n <= 3:
            raise DomainError("expression initial conditions need n <= 3")
        object.__setattr__(self, "_expr", parse_expression(self.source, expression_variables(self.n)))

    @property
    def expr(self) -> Expression:
        return self._expr

    @property
    def radial(self):
        return self.radial_hint or self.expr.variables() <= {"v"}

    def env(self, v) -> dict:
        v = np.asarray(v, dtype=float)
        env = {f"v{i + 1}": v[..., i] for i in range(self.n)}
        env["v"] = _norm(v)
        if self.n == 2:
            env["theta"] = np.arctan2(v[..., 1], v[..., 0])
        elif self.n == 3:
            env["theta"], env["phi"] = harmonics.polar_angles(v)
        return env

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        out = self.expr.evaluate(self.env(v))
        return np.broadcast_to(out, v.shape[:-1]).astype(float)

    def profile(self, r):
        if not self.radial:
            raise DomainError("expression is not radial")
        r = np.asarray(r, dtype=float)
        pts = np.zeros(r.shape + (self.n,))
        pts[..., 0] = r
        return self(pts)

    def describe(self):
        return {"type": "expression", "expr": self.source}


# -- validation helpers -----------------------------------------------------

def _check_growth(ic: InitialCondition, gamma: float, shift: float, rule: GaussHermiteRule):
    span = abs(shift) + 2.0 * math.sqrt(max(gamma, 0.0)) * rule.u_max
    if abs(ic.growth) * span > EXPONENT_BUDGET:
        raise DomainError(
            f"growth bound p_max={ic.growth!r} with log-range {span:.3g} exceeds the floating-point exponent budget"
        )


def _require_variant(coeffs: IntegratedCoefficients, variant: str):
    if coeffs.variant != variant:
        raise SpecError(f"problem variant is {coeffs.variant!r}, this solver handles {variant!r}")


def _check_lambda(coeffs: IntegratedCoefficients, lam: float):
    if not 0.0 <= lam <= coeffs.spec.lambda_max * (1 + 1e-12):
        raise DomainError(f"lambda={lam!r} outside [0, {coeffs.spec.lambda_max!r}]")


# -- solvers ------------------------------------------------------------------

def solve_degenerate(coeffs: IntegratedCoefficients, ic: InitialCondition, lam: float, v,
                     rule: GaussHermiteRule | None = None):
    """Degenerate-diffusion solution at ``lam`` and Cartesian point(s) ``v``."""
    _require_variant(coeffs, DEGENERATE)
    _check_lambda(coeffs, lam)
    v = np.asarray(v, dtype=float)
    if lam == 0:
        return _scalar(ic(v))
    rule = rule or gauss_hermite(DEFAULT_GH_NODES)
    beta0, beta1, gamma = coeffs.at(lam)
    assert gamma >= 0, "gamma must be non-negative when c > 0"
    _check_growth(ic, gamma, beta1, rule)
    return _scalar(math.exp(beta0) * gaussian_log_average(ic, gamma, beta1, rule, v))


def _scalar(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


@dataclass
class _Modal:
    """Truncated modal form; ``both`` computes coefficients and tail in one pass."""

    modes: tuple[HarmonicMode, ...]
    coefficients: Callable
    tail: Callable  # radii -> omitted norm over max(1, data norm), worst radius
    both: Callable | None = None

    def analyse(self, radii) -> tuple[np.ndarray, float]:
        if self.both is not None:
            coef, rel = self.both(radii)
            return coef, float(np.max(rel)) if rel.size else 0.0
        return self.coefficients(radii), self.tail(radii) if np.size(radii) else 0.0


def _modal_form(ic: InitialCondition, n: int, l_max: int | None) -> tuple[_Modal, int]:
    """Mode list and radial coefficient evaluator for ``ic`` truncated at ``l_max``."""
    if ic.radial:
        norm = math.sqrt(sphere_area(n))
        return _Modal((HarmonicMode(0, 1, n),), lambda r: norm * ic.profile(r)[None], lambda r: 0.0), 0
    if n < 2:
        raise DomainError("isotropic problem with n = 1 supports radial (even) data only")
    exact = ic.expansion(n)
    if exact is not None:
        top = max((m.l for m in exact.modes), default=0)
        if l_max is None:
            l_max = top
        keep = [i for i, m in enumerate(exact.modes) if m.l <= l_max]
        drop = [i for i, m in enumerate(exact.modes) if m.l > l_max]

        def coefficients(r):
            return exact.coefficients(r)[keep]

        def tail(r):
            if not drop:
                return 0.0
            c = exact.coefficients(r)
            total = np.sqrt(np.sum(c * c, axis=0))
            dropped = np.sqrt(np.sum(c[drop] ** 2, axis=0))
            return float(np.max(dropped / np.maximum(1.0, total)))

        modal = _Modal(tuple(exact.modes[i] for i in keep), coefficients, tail)
        return modal, l_max
    if not isinstance(ic, GeneralExpression):
        raise DomainError(f"no harmonic expansion available for {type(ic).__name__}")
    proj = Projector(n, l_max if l_max is not None else DEFAULT_L_MAX)
    return _Modal(proj.modes, lambda r: proj.coefficients(ic, r),
                  lambda r: float(np.max(proj.analyse(ic, r)[1])),
                  lambda r: proj.analyse(ic, r)), proj.l_max


def _gh_radii(r: np.ndarray, gamma: float, shift: float, rule: GaussHermiteRule) -> np.ndarray:
    factors = np.exp(shift + 2.0 * math.sqrt(gamma) * rule.nodes)
    return factors.reshape((-1,) + (1,) * r.ndim) * r


def _isotropic_terms(coeffs, ic, lam, v, l_max, rule, spectral_sign):
    """Return ``(value, l_max used, tail)`` for the isotropic solution."""
    n = coeffs.n
    beta0, beta1, gamma = coeffs.at(lam)
    shift = beta1 + (n - 2) * gamma
    _check_growth(ic, gamma, shift, rule)
    r = _norm(v)
    if ic.radial:
        val = gaussian_log_average(ic.profile, gamma, shift, rule, r)
        return math.exp(beta0) * val, 0, 0.0

    auto = l_max is None and isinstance(ic, GeneralExpression)
    current = DEFAULT_L_MAX if auto else l_max
    while True:
        modal, used = _modal_form(ic, n, current)
        radii = _gh_radii(r, gamma, shift, rule) if gamma > GAMMA_EPS else r * math.exp(shift)
        coef, tail = modal.analyse(radii)  # coef: (modes, [gh,] *points)
        if tail <= TAIL_TOL or not auto or current >= L_MAX_CAP:
            break
        current = min(2 * current, L_MAX_CAP)
    if tail > TAIL_TOL:
        raise TruncationError(f"harmonic truncation at l_max={used} leaves a non-negligible tail", tail)

    if gamma > GAMMA_EPS:
        radial = np.tensordot(rule.weights, np.moveaxis(coef, 1, 0), axes=(0, 0)) / math.sqrt(math.pi)
    else:
        radial = coef
    Y = harmonics.harmonic_matrix(modal.modes, v)
    factors = np.array([heat_on_sphere_factor(m.l, n, gamma, spectral_sign) for m in modal.modes])
    factors = factors.reshape((-1,) + (1,) * (Y.ndim - 1))
    return math.exp(beta0) * np.sum(factors * Y * radial, axis=0), used, tail


def solve_isotropic(coeffs: IntegratedCoefficients, ic: InitialCondition, lam: float, v,
                    l_max: int | None = None, rule: GaussHermiteRule | None = None,
                    spectral_sign: int = 1):
    """Isotropic-diffusion solution at ``lam`` and Cartesian point(s) ``v``.

    ``l_max=None`` uses the exact top degree of finite data, or adaptive
    doubling from 16 up to 64 for expression data.  An explicit ``l_max``
    below the data's top degree raises :class:`TruncationError`.
    """
    _require_variant(coeffs, ISOTROPIC)
    _check_lambda(coeffs, lam)
    v = np.asarray(v, dtype=float)
    if lam == 0:
        return _scalar(ic(v))
    rule = rule or gauss_hermite(DEFAULT_GH_NODES)
    value, _, _ = _isotropic_terms(coeffs, ic, lam, v, l_max, rule, spectral_sign)
    return _scalar(value)


def solve_isotropic_n3(coeffs: IntegratedCoefficients, ic: InitialCondition, lam: float, v,
                       l_max: int | None = None, rule: GaussHermiteRule | None = None):
    """n = 3 isotropic solution written as a double sum over ``Y_l^m(theta, phi)``."""
    _require_variant(coeffs, ISOTROPIC)
    _check_lambda(coeffs, lam)
    if coeffs.n != 3:
        raise DomainError("solve_isotropic_n3 requires n = 3")
    v = np.asarray(v, dtype=float)
    if lam == 0:
        return _scalar(ic(v))
    rule = rule or gauss_hermite(DEFAULT_GH_NODES)
    beta0, beta1, gamma = coeffs.at(lam)
    shift = beta1 + gamma
    _check_growth(ic, gamma, shift, rule)
    r = _norm(v)
    theta, phi = harmonics.polar_angles(v)
    if ic.radial:
        # only l = m = 0 survives; Y_0^0 phi_00 = phi
        inner = np.zeros_like(r)
        for u, w in zip(rule.nodes, rule.weights):
            inner = inner + w * ic.profile(r * math.exp(shift + 2 * math.sqrt(gamma) * u))
        return _scalar(math.exp(beta0) * inner / math.sqrt(math.pi))
    modal, used = _modal_form(ic, 3, l_max)
    radii = _gh_radii(r, gamma, shift, rule)
    coef, tail = modal.analyse(radii)
    if tail > TAIL_TOL:
        raise TruncationError(f"harmonic truncation at l_max={used} leaves a non-negligible tail", tail)
    index = {(m.l, m.m): i for i, m in enumerate(modal.modes)}
    total = np.zeros_like(r)
    for l in range(used + 1):
        decay = math.exp(-gamma * l * (l + 1))
        for m in range(-l, l + 1):
            i = index.get((l, m))
            if i is None:
                continue
            phi_lm = np.tensordot(rule.weights, coef[i], axes=(0, 0)) / math.sqrt(math.pi)
            total = total + decay * harmonics.eval_Y3(l, m, theta, phi) * phi_lm
    return _scalar(math.exp(beta0) * total)


def solve(coeffs: IntegratedCoefficients, ic: InitialCondition, lam: float, v, **kwargs):
    """Dispatch on the problem variant."""
    if coeffs.variant == DEGENERATE:
        kwargs.pop("l_max", None)
        kwargs.pop("spectral_sign", None)
        return solve_degenerate(coeffs, ic, lam, v, **kwargs)
    return solve_isotropic(coeffs, ic, lam, v, **kwargs)


def moment_factor(coeffs: IntegratedCoefficients, q: float, lam: float) -> float:
    """Closed-form ratio ``M_q(lam) / M_q(0)`` for ``M_q = int |v|^q P d^n v``.

    Valid for any radial density with finite ``M_q(0)`` (and for any density
    in the degenerate problem, which acts along rays only).
    """
    n = coeffs.n
    beta0, beta1, gamma = coeffs.at(lam)
    shift = beta1 + ((n - 2) * gamma if coeffs.variant == ISOTROPIC else 0.0)
    return math.exp(beta0 - (n + q) * shift + (n + q) ** 2 * gamma)


# -- batched field evaluation -------------------------------------------------

@dataclass
class SolveOptions:
    gh_nodes: int = DEFAULT_GH_NODES
    l_max: int | None = None
    threads: int | None = None
    chunk: int = 2048

    def worker_count(self) -> int:
        if self.threads is not None:
            return max(1, int(self.threads))
        env = os.environ.get("CASCADE_FPE_THREADS")
        return max(1, int(env)) if env else 1


class FieldEvaluationError(CascadeError):
    def __init__(self, failures: list[tuple[int, int, str]]):
        self.failures = failures
        head = "; ".join(f"lambda[{i}] point[{j}]: {msg}" for i, j, msg in failures[:5])
        more = f" (+{len(failures) - 5} more)" if len(failures) > 5 else ""
        super().__init__(f"{len(failures)} point evaluation(s) failed: {head}{more}")


@dataclass
class SolutionField:
    lambdas: np.ndarray
    points: np.ndarray
    values: np.ndarray
    abs_err: np.ndarray
    metadata: dict = field(default_factory=dict)


def _evaluate_block(coeffs, ic, lam, pts, options, rule, half_rule):
    """Values, error estimates, l_max and tail for one block of points at one lambda."""
    beta0, beta1, gamma = coeffs.at(lam)
    if lam == 0:
        vals = np.asarray(ic(pts), dtype=float)
        return vals, np.zeros_like(vals), 0, 0.0
    r = _norm(pts)
    origin = r == 0
    vals = np.empty(len(pts))
    err = np.zeros(len(pts))
    used, tail = 0, 0.0
    off = ~origin
    if np.any(off):
        p = pts[off]
        if coeffs.variant == DEGENERATE:
            full = solve_degenerate(coeffs, ic, lam, p, rule)
            half = solve_degenerate(coeffs, ic, lam, p, half_rule)
        else:
            full, used, tail = _isotropic_terms(coeffs, ic, lam, p, options.l_max, rule, 1)
            half, _, _ = _isotropic_terms(coeffs, ic, lam, p, used, half_rule, 1)
        full = np.asarray(full, dtype=float)
        vals[off] = full
        g = abs(ic.growth)
        err[off] = (np.abs(full - half) + math.exp(beta0) * tail * np.maximum(1.0, np.abs(full))
                    + np.abs(full) * coeffs.quad_tol * (1 + g + g * g))
    if np.any(origin):
        vals[origin] = math.exp(beta0) * np.asarray(ic(pts[origin]), dtype=float)
    return vals, err, used, tail


def evaluate_field(coeffs: IntegratedCoefficients, ic: InitialCondition, lambdas: Sequence[float],
                   points, options: SolveOptions | None = None) -> SolutionField:
    """Evaluate the solution on every ``(lambda, point)`` pair.

    Points at the origin get ``exp(beta0) phi(0)`` (the continuous
    extension) and are listed under ``metadata['origin_points']``.
    Evaluation failures are collected with their indices and raised together.
    """
    options = options or SolveOptions()
    n = coeffs.n
    lambdas = np.asarray(list(lambdas), dtype=float)
    points = np.asarray(points, dtype=float).reshape(-1, n)
    rule = gauss_hermite(options.gh_nodes)
    half_rule = gauss_hermite(max(1, options.gh_nodes // 2))
    for lam in lambdas:
        _check_lambda(coeffs, lam)
    # coefficient integrals are computed before any parallel work
    beta = [coeffs.at(lam) for lam in lambdas]

    values = np.zeros((len(lambdas), len(points)))
    errs = np.zeros_like(values)
    used = [0] * len(lambdas)
    tails = [0.0] * len(lambdas)
    failures: list[tuple[int, int, str]] = []
    blocks = [(i, s) for i in range(len(lambdas)) for s in range(0, len(points), options.chunk)]

    def run(block):
        i, start = block
        pts = points[start:start + options.chunk]
        try:
            return block, _evaluate_block(coeffs, ic, lambdas[i], pts, options, rule, half_rule), None
        except CascadeError:
            # retry point by point so failures carry their indices
            vals, err = np.zeros(len(pts)), np.zeros(len(pts))
            lm, tail, bad = 0, 0.0, []
            for j in range(len(pts)):
                try:
                    v1, e1, l1, t1 = _evaluate_block(coeffs, ic, lambdas[i], pts[j:j + 1], options, rule, half_rule)
                except CascadeError as exc:
                    bad.append((i, start + j, str(exc)))
                    continue
                vals[j], err[j], lm, tail = v1[0], e1[0], max(lm, l1), max(tail, t1)
            return block, (vals, err, lm, tail), bad

    workers = options.worker_count()
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]

    for (i, start), out, bad in results:
        if bad:
            failures.extend(bad)
            continue
        vals, err, lm, tail = out
        values[i, start:start + len(vals)] = vals
        errs[i, start:start + len(vals)] = err
        used[i] = max(used[i], lm)
        tails[i] = max(tails[i], tail)
    if failures:
        raise FieldEvaluationError(sorted(failures))

    meta = {
        "variant": coeffs.variant,
        "n": n,
        "gh_nodes": rule.m,
        "quad_tol": coeffs.quad_tol,
        "l_max": used,
        "tail": tails,
        "beta0": [b[0] for b in beta],
        "beta1": [b[1] for b in beta],
        "gamma": [b[2] for b in beta],
        "origin_points": [int(j) for j in np.flatnonzero(_norm(points) == 0)],
    }
    return SolutionField(lambdas, points, values, errs, meta)
