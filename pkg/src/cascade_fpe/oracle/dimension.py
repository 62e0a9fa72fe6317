"""Brute-force dimension of the space of harmonic homogeneous polynomials."""

from __future__ import annotations

from itertools import combinations_with_replacement

import numpy as np

from ..errors import DomainError

MAX_L = 8
MAX_N = 6


def _monomials(degree: int, n: int) -> list[tuple[int, ...]]:
    out = []
    for combo in combinations_with_replacement(range(n), degree):
        exps = [0] * n
        for i in combo:
            exps[i] += 1
        out.append(tuple(exps))
    return out


def laplacian_matrix(l: int, n: int) -> np.ndarray:
    """Matrix of the Laplacian from degree-``l`` to degree-``l-2`` monomials."""
    cols = _monomials(l, n)
    rows = _monomials(l - 2, n) if l >= 2 else []
    index = {m: i for i, m in enumerate(rows)}
    mat = np.zeros((len(rows), len(cols)))
    for j, alpha in enumerate(cols):
        for i, a in enumerate(alpha):
            if a >= 2:
                target = list(alpha)
                target[i] -= 2
                mat[index[tuple(target)], j] += a * (a - 1)
    return mat


def harmonic_dimension(l: int, n: int) -> int:
    """Kernel dimension of the Laplacian on degree-``l`` homogeneous polynomials in ``n`` variables.

    The rank is read off the singular values; the gap between retained and
    discarded values is checked so an ill-conditioned count fails loudly.
    """
    if not (0 <= l <= MAX_L and 1 <= n <= MAX_N):
        raise DomainError(f"harmonic_dimension supports 0 <= l <= {MAX_L}, 1 <= n <= {MAX_N}; got l={l}, n={n}")
    mat = laplacian_matrix(l, n)
    ncols = len(_monomials(l, n))
    if mat.size == 0:
        return ncols
    s = np.linalg.svd(mat, compute_uv=False)
    tol = s[0] * max(mat.shape) * np.finfo(float).eps
    rank = int(np.sum(s > tol))
    if rank < len(s) and s[rank - 1] < 1e6 * tol:
        raise ArithmeticError(f"rank of the Laplacian matrix is numerically ambiguous for l={l}, n={n}")
    return ncols - rank
