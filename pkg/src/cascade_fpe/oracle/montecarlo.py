"""Monte-Carlo simulation of the diffusions behind the two Fokker-Planck equations.

The equations carry no factor 1/2 on the second-order term, so the
diffusion tensor is ``D2 = sigma sigma^T / 2`` and (Ito)

    isotropic:  dv = -a v dlam + sqrt(2c) |v| dW,   W n-dimensional
    degenerate: dv = -a v dlam + sqrt(2c) v dB,     B scalar

The degenerate noise is scalar multiplicative, so ``ln|v|`` is Gaussian and
paths can be advanced exactly:
``v -> v exp(-(A + G) + sqrt(2 G) Z)`` with ``A, G`` the step integrals of
``a`` and ``c``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..coeffs import DEGENERATE, IntegratedCoefficients
from ..errors import CascadeError, DomainError

CHUNK = 16384


class MonteCarloError(CascadeError):
    pass


@dataclass
class MCEstimate:
    observable: str
    n_paths: int
    steps: int
    estimate: float
    stderr: float
    method: str
    seed: int


def _threads() -> int:
    env = os.environ.get("CASCADE_FPE_THREADS")
    return max(1, int(env)) if env else 1


def _simulate_chunk(coeffs, sampler, size, lambda_end, steps, method, seed_seq):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    v = np.asarray(sampler(size, rng), dtype=float)
    grid = np.linspace(0.0, lambda_end, steps + 1)
    if method == "exact":
        alpha = np.array([coeffs.alpha(t) for t in grid])
        gamma = np.array([coeffs.gamma(t) for t in grid])
        for j in range(steps):
            da, dg = alpha[j + 1] - alpha[j], gamma[j + 1] - gamma[j]
            z = rng.standard_normal(size)
            v = v * np.exp(-(da + dg) + math.sqrt(2 * dg) * z)[:, None]
        return v
    dt = lambda_end / steps
    iso = coeffs.variant != DEGENERATE
    for j in range(steps):
        t = grid[j]
        a, c = float(coeffs.spec.a_at(t)), float(coeffs.spec.c_at(t))
        if iso:
            dw = rng.standard_normal(v.shape) * math.sqrt(dt)
            v = v - a * v * dt + math.sqrt(2 * c) * np.linalg.norm(v, axis=1, keepdims=True) * dw
        else:
            db = rng.standard_normal(size) * math.sqrt(dt)
            v = v - a * v * dt + math.sqrt(2 * c) * v * db[:, None]
    return v


def simulate_paths(coeffs: IntegratedCoefficients, sampler: Callable, lambda_end: float, n_paths: int,
                   seed: int, steps: int = 100, method: str | None = None) -> np.ndarray:
    """Terminal states of ``n_paths`` paths started from ``sampler(size, rng)``.

    Paths are generated in fixed chunks, each with its own child seed, so
    the output depends only on ``(seed, n_paths, steps, method)``.
    """
    if method is None:
        method = "exact" if coeffs.variant == DEGENERATE else "euler"
    if method not in ("exact", "euler"):
        raise ValueError(f"unknown method {method!r}")
    if method == "exact" and coeffs.variant != DEGENERATE:
        raise DomainError("exact log-space updates exist only for the degenerate (scalar-noise) problem")
    if not 0 < lambda_end <= coeffs.spec.lambda_max:
        raise DomainError(f"lambda_end={lambda_end!r} outside (0, lambda_max]")
    sizes = [min(CHUNK, n_paths - s) for s in range(0, n_paths, CHUNK)]
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(sizes, children))

    def run(job):
        size, child = job
        return _simulate_chunk(coeffs, sampler, size, lambda_end, steps, method, child)

    if _threads() > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return np.concatenate(parts, axis=0) if parts else np.empty((0, coeffs.n))


def mc_simulate(coeffs: IntegratedCoefficients, density, observable: Callable, lambda_end: float,
                n_paths: int, seed: int, steps: int = 100, method: str | None = None,
                name: str = "f") -> MCEstimate:
    """Mean of ``observable(v(lambda_end))`` with its standard error ``std / sqrt(N)``.

    ``density`` provides ``sample(size, rng)``.  Non-finite path values
    abort the run.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths for a standard error")
    method = method or ("exact" if coeffs.variant == DEGENERATE else "euler")
    v = simulate_paths(coeffs, density.sample, lambda_end, n_paths, seed, steps, method)
    vals = np.broadcast_to(np.asarray(observable(v), dtype=float), (len(v),))
    bad = int(np.sum(~np.isfinite(vals)))
    if bad:
        raise MonteCarloError(f"{bad} of {n_paths} paths produced non-finite values")
    return MCEstimate(name, n_paths, steps, float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(n_paths)),
                      method, seed)
