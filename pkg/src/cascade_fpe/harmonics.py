"""Laplace-Beltrami spectrum on S^{n-1}, real harmonic bases and sphere quadrature.

Conventions
-----------
* Hyperspherical coordinates follow the chain ``v1 = r cos t1``,
  ``v2 = r sin t1 cos t2``, ..., ``vn = r sin t1 ... sin t_{n-1}``
  (:func:`to_cartesian` / :func:`from_cartesian`).
* n = 2 harmonics are ``1/sqrt(2 pi)``, ``cos(l t)/sqrt(pi)`` (k=1) and
  ``sin(l t)/sqrt(pi)`` (k=2) with ``t = atan2(v2, v1)``.
* n = 3 harmonics are the real, orthonormal ``Y_l^m(theta, phi)`` with
  ``theta`` the polar angle from the v3 axis and ``phi`` the azimuth in the
  (v1, v2) plane, no Condon-Shortley phase.  Index ``k = m + l + 1``.
* n >= 4 only zonal harmonics (k = 1) are provided, functions of ``t1``:
  ``sqrt(d_{l,n} / |S^{n-1}|) P_{l,n}(cos t1)`` with ``P_{l,n}`` the
  n-dimensional Legendre polynomial, ``P_{l,n}(1) = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import DomainError


def eigenvalue(l: int, n: int) -> int:
    """Eigenvalue ``-l (l + n - 2)`` of the Laplace-Beltrami operator on S^{n-1}."""
    if l < 0 or n < 2:
        raise DomainError(f"eigenvalue needs l >= 0 and n >= 2, got l={l}, n={n}")
    return -l * (l + n - 2)


def degeneracy(l: int, n: int) -> int:
    """Multiplicity of the eigenvalue of degree ``l`` on S^{n-1}.

    ``(2l + n - 2) (l + n - 3)! / ((n - 2)! l!)``, i.e. the number of
    linearly independent harmonic homogeneous polynomials of degree ``l``.
    """
    if l < 0 or n < 2:
        raise DomainError(f"degeneracy needs l >= 0 and n >= 2, got l={l}, n={n}")
    if n == 2:
        return 1 if l == 0 else 2
    if l == 0:
        return 1
    num = (2 * l + n - 2) * math.factorial(l + n - 3)
    den = math.factorial(n - 2) * math.factorial(l)
    assert num % den == 0
    return num // den


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n (2 for n = 1)."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class HarmonicMode:
    l: int
    k: int
    n: int

    def __post_init__(self):
        d = degeneracy(self.l, self.n)
        if not 1 <= self.k <= d:
            raise DomainError(f"mode index k={self.k} outside [1, {d}] for l={self.l}, n={self.n}")

    @property
    def eigenvalue(self) -> int:
        return eigenvalue(self.l, self.n)

    @property
    def degeneracy(self) -> int:
        return degeneracy(self.l, self.n)

    @property
    def m(self) -> int:
        """Azimuthal order for n = 3 (``k = m + l + 1``)."""
        return self.k - self.l - 1


def modes(n: int, l_max: int) -> list[HarmonicMode]:
    """All supported modes with ``l <= l_max`` in a fixed order (zonal only for n >= 4)."""
    if n >= 4:
        return [HarmonicMode(l, 1, n) for l in range(l_max + 1)]
    return [HarmonicMode(l, k, n) for l in range(l_max + 1) for k in range(1, degeneracy(l, n) + 1)]


# -- coordinates -----------------------------------------------------------

def to_cartesian(r, angles) -> np.ndarray:
    """Map radius and ``n - 1`` hyperspherical angles (last axis) to R^n."""
    angles = np.asarray(angles, dtype=float)
    r = np.asarray(r, dtype=float)
    m = angles.shape[-1]
    out = np.empty(angles.shape[:-1] + (m + 1,))
    sin_prod = np.ones(angles.shape[:-1])
    for i in range(m):
        out[..., i] = sin_prod * np.cos(angles[..., i])
        sin_prod = sin_prod * np.sin(angles[..., i])
    out[..., m] = sin_prod
    return r[..., None] * out


def from_cartesian(v) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`to_cartesian`: returns ``(r, angles)``."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    if n < 2:
        raise DomainError("hyperspherical angles need n >= 2")
    r = np.linalg.norm(v, axis=-1)
    angles = np.empty(v.shape[:-1] + (n - 1,))
    for i in range(n - 2):
        tail = np.linalg.norm(v[..., i + 1:], axis=-1)
        angles[..., i] = np.arctan2(tail, v[..., i])
    angles[..., n - 2] = np.mod(np.arctan2(v[..., n - 1], v[..., n - 2]), 2 * np.pi)
    return r, angles


def polar_angles(v) -> tuple[np.ndarray, np.ndarray]:
    """n = 3 polar angle from the v3 axis and azimuth in the (v1, v2) plane."""
    v = np.asarray(v, dtype=float)
    rho = np.hypot(v[..., 0], v[..., 1])
    theta = np.arctan2(rho, v[..., 2])
    phi = np.mod(np.arctan2(v[..., 1], v[..., 0]), 2 * np.pi)
    return theta, phi


# -- harmonic functions ----------------------------------------------------

def _legendre_table(l_max: int, x: np.ndarray) -> np.ndarray:
    """Normalised associated Legendre values ``N_lm P_l^m(x)`` for 0 <= m <= l <= l_max.

    ``N_lm = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!)``; no Condon-Shortley phase.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    q = np.zeros((l_max + 1, l_max + 1) + x.shape)
    q[0, 0] = 1.0 / math.sqrt(4 * math.pi)
    for m in range(1, l_max + 1):
        q[m, m] = math.sqrt((2 * m + 1) / (2 * m)) * s * q[m - 1, m - 1]
    for m in range(0, l_max):
        q[m + 1, m] = math.sqrt(2 * m + 3) * x * q[m, m]
    for m in range(0, l_max + 1):
        for l in range(m + 2, l_max + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            q[l, m] = a * (x * q[l - 1, m] - b * q[l - 2, m])
    return q


def eval_Y3(l: int, m: int, theta, phi):
    """Real orthonormal spherical harmonic on S^2."""
    if l < 0 or abs(m) > l:
        raise DomainError(f"need |m| <= l, got l={l}, m={m}")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    q = _legendre_table(l, np.cos(theta))[l, abs(m)]
    if m > 0:
        out = math.sqrt(2.0) * q * np.cos(m * phi)
    elif m < 0:
        out = math.sqrt(2.0) * q * np.sin(-m * phi)
    else:
        out = q * np.ones_like(phi)
    return float(out) if out.ndim == 0 else out


def legendre_n(l: int, n: int, t):
    """n-dimensional Legendre polynomial ``P_{l,n}(t)`` by three-term recurrence."""
    t = np.asarray(t, dtype=float)
    p_prev, p = np.ones_like(t), t.copy()
    if l == 0:
        return p_prev
    for j in range(1, l):
        p_prev, p = p, ((2 * j + n - 2) * t * p - j * p_prev) / (j + n - 2)
    return p


def zonal_harmonic(l: int, n: int, t):
    """Normalised zonal harmonic of degree ``l`` on S^{n-1} as a function of ``cos t1``."""
    return math.sqrt(degeneracy(l, n) / sphere_area(n)) * legendre_n(l, n, t)


def harmonic_matrix(mode_list: Sequence[HarmonicMode], v) -> np.ndarray:
    """Values of every mode at the directions of ``v`` (last axis = n).

    Returns an array of shape ``(len(mode_list),) + v.shape[:-1]``.
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    out = np.empty((len(mode_list),) + v.shape[:-1])
    if not mode_list:
        return out
    l_top = max(md.l for md in mode_list)
    if n == 2:
        t = np.arctan2(v[..., 1], v[..., 0])
        for i, md in enumerate(mode_list):
            if md.l == 0:
                out[i] = 1.0 / math.sqrt(2 * math.pi)
            elif md.k == 1:
                out[i] = np.cos(md.l * t) / math.sqrt(math.pi)
            else:
                out[i] = np.sin(md.l * t) / math.sqrt(math.pi)
    elif n == 3:
        theta, phi = polar_angles(v)
        q = _legendre_table(l_top, np.cos(theta))
        for i, md in enumerate(mode_list):
            m = md.m
            if m > 0:
                out[i] = math.sqrt(2.0) * q[md.l, m] * np.cos(m * phi)
            elif m < 0:
                out[i] = math.sqrt(2.0) * q[md.l, -m] * np.sin(-m * phi)
            else:
                out[i] = q[md.l, 0]
    elif n >= 4:
        r = np.linalg.norm(v, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(r > 0, v[..., 0] / np.where(r > 0, r, 1.0), 1.0)
        for i, md in enumerate(mode_list):
            if md.k != 1:
                raise DomainError(f"n={n}: only zonal harmonics (k=1) are supported, got k={md.k}")
            out[i] = zonal_harmonic(md.l, n, t)
    else:
        raise DomainError("spherical harmonics need n >= 2")
    return out


# -- quadrature ------------------------------------------------------------

@dataclass(frozen=True)
class SphereRule:
    """Nodes on the unit sphere (Cartesian, and hyperspherical angles) with weights."""

    n: int
    order: int
    points: np.ndarray
    angles: np.ndarray
    weights: np.ndarray
    zonal: bool = False


def sphere_quadrature(n: int, order: int, zonal: bool = False) -> SphereRule:
    """Quadrature on S^{n-1} exact for polynomials of degree <= ``order``.

    n = 2: uniform trapezoid; n = 3: Gauss-Legendre in cos(theta) times a
    uniform azimuthal rule.  For n >= 4 only zonal integrands are handled,
    with Gauss-Gegenbauer nodes in ``cos t1`` whose weight function
    ``(1 - t^2)^((n-3)/2)`` is exactly the reduced surface measure.
    """
    if order < 0:
        raise DomainError(f"quadrature order must be >= 0, got {order}")
    if n == 2 and not zonal:
        m = order + 1
        t = 2 * np.pi * np.arange(m) / m
        angles = t[:, None]
        return SphereRule(n, order, to_cartesian(np.ones(m), angles), angles, np.full(m, 2 * np.pi / m))
    if n == 3 and not zonal:
        nt = order // 2 + 1
        nphi = order + 1
        x, wx = np.polynomial.legendre.leggauss(nt)
        phi = 2 * np.pi * np.arange(nphi) / nphi
        theta = np.arccos(x)
        T, P = np.meshgrid(theta, phi, indexing="ij")
        pts = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
        w = (wx[:, None] * np.full(nphi, 2 * np.pi / nphi)[None, :]).ravel()
        return SphereRule(n, order, pts, np.stack([T.ravel(), P.ravel()], axis=-1), w)
    if n >= 3 and (zonal or n >= 4):
        if not zonal:
            raise DomainError(f"n={n}: only zonal sphere quadrature is supported (pass zonal=True)")
        m = order // 2 + 1
        t, w = special.roots_gegenbauer(m, (n - 2) / 2)
        w = w * sphere_area(n - 1)
        angles = np.zeros((m, n - 1))
        angles[:, 0] = np.arccos(t)
        return SphereRule(n, order, to_cartesian(np.ones(m), angles), angles, w, zonal=True)
    raise DomainError(f"unsupported sphere quadrature (n={n}, order={order}, zonal={zonal})")


# -- projection ------------------------------------------------------------

@dataclass
class HarmonicExpansion:
    """``g(r, omega) = sum g_{l,k}(r) Y_{l,k}(omega)`` truncated at ``l_max``.

    ``radial`` holds one callable per mode.  ``batch`` (if set) returns all
    coefficients at once with shape ``(len(modes),) + r.shape``.
    ``radii``/``values`` record the coefficients at the radii used for the
    tail estimate when the expansion came from :func:`project`.
    """

    n: int
    modes: tuple[HarmonicMode, ...]
    radial: tuple[Callable, ...]
    l_max: int
    tail: float = 0.0
    radii: np.ndarray | None = None
    values: np.ndarray | None = None
    batch: Callable | None = field(default=None, repr=False)

    def coefficients(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.batch is not None:
            return self.batch(r)
        out = np.empty((len(self.modes),) + r.shape)
        for i, fn in enumerate(self.radial):
            out[i] = fn(r)
        return out

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        r = np.linalg.norm(v, axis=-1)
        return np.sum(self.coefficients(r) * harmonic_matrix(self.modes, v), axis=0)


class Projector:
    """Precomputed ``Y * w`` table for projecting functions onto modes up to ``l_max``."""

    def __init__(self, n: int, l_max: int, order: int | None = None):
        if n < 2:
            raise DomainError("projection needs n >= 2")
        zonal = n >= 4
        order = 4 * max(l_max, 1) if order is None else order
        if order < 2 * l_max:
            raise DomainError(f"quadrature order {order} insufficient for l_max={l_max} (need >= {2 * l_max})")
        self.n = n
        self.l_max = l_max
        self.rule = sphere_quadrature(n, order, zonal=zonal)
        self.modes = tuple(modes(n, l_max))
        self.Y = harmonic_matrix(self.modes, self.rule.points)
        self.Yw = self.Y * self.rule.weights

    def samples(self, g: Callable, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        pts = r[..., None, None] * self.rule.points
        return np.asarray(g(pts), dtype=float)

    def coefficients(self, g: Callable, r) -> np.ndarray:
        return self.analyse(g, r)[0]

    def residual(self, g: Callable, r) -> np.ndarray:
        """L2 norm on the sphere of ``g - sum_{l<=l_max}`` at each radius."""
        G = self.samples(g, r)
        coef = G @ self.Yw.T
        res = G - coef @ self.Y
        return np.sqrt(np.abs(res * res @ self.rule.weights))

    def analyse(self, g: Callable, r, max_samples: int = 1 << 21) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients ``(modes,) + r.shape`` and the relative residual at each radius.

        The residual is divided by ``max(1, |g|)`` in the sphere L2 norm.
        Radii are processed in slabs of at most ``max_samples`` sample values.
        """
        r = np.asarray(r, dtype=float)
        flat = r.reshape(-1)
        coef = np.empty((flat.size, len(self.modes)))
        rel = np.empty(flat.size)
        step = max(1, max_samples // len(self.rule.weights))
        for s in range(0, flat.size, step):
            G = self.samples(g, flat[s:s + step])
            c = G @ self.Yw.T
            res = G - c @ self.Y
            norm = np.sqrt(np.abs(G * G @ self.rule.weights))
            coef[s:s + step] = c
            rel[s:s + step] = np.sqrt(np.abs(res * res @ self.rule.weights)) / np.maximum(1.0, norm)
        return np.moveaxis(coef.reshape(r.shape + (-1,)), -1, 0), rel.reshape(r.shape)

def project(g: Callable, n: int, l_max: int, radii, order: int | None = None, zonal: bool = False) -> HarmonicExpansion:
    """Project ``g`` (Cartesian callable) onto harmonic modes on spheres of the given radii.

    The returned expansion can be re-evaluated at any radius; ``tail`` is
    the largest residual norm over ``radii``.  For n >= 4 the caller must
    assert that ``g`` is zonal (depends on ``v1 / |v|`` only).
    """
    if n >= 4 and not zonal:
        raise DomainError(f"n={n}: projection is only available for zonal functions")
    proj = Projector(n, l_max, order)
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    values = proj.coefficients(g, radii)
    tail = float(np.max(proj.residual(g, radii))) if radii.size else 0.0

    def batch(r):
        return proj.coefficients(g, r)

    radial = tuple((lambda r, i=i: proj.coefficients(g, r)[i]) for i in range(len(proj.modes)))
    return HarmonicExpansion(n, proj.modes, radial, l_max, tail, radii, values, batch)
