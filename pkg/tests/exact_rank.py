"""Exact rank over the rationals via fraction-free Gaussian elimination
(Bareiss), for cross-checking floating-point rank decisions."""

from fractions import Fraction

import numpy as np


def exact_rank(rows) -> int:
    """Rank of a matrix with entries convertible to Fraction."""
    M = [[Fraction(x) for x in row] for row in rows]
    if not M:
        return 0
    nrows, ncols = len(M), len(M[0])
    rank = 0
    r = 0
    for c in range(ncols):
        pivot = None
        for i in range(r, nrows):
            if M[i][c] != 0:
                pivot = i
                break
        if pivot is None:
            continue
        M[r], M[pivot] = M[pivot], M[r]
        pv = M[r][c]
        for i in range(r + 1, nrows):
            factor = M[i][c] / pv
            if factor != 0:
                M[i] = [a - factor * b for a, b in zip(M[i], M[r])]
        r += 1
        rank += 1
        if r == nrows:
            break
    return rank


def rational_householder(n: int, u) -> np.ndarray:
    """Orthonormal matrix with rational entries: I - 2 u u^T / (u^T u)."""
    u = [Fraction(x) for x in u]
    denom = sum(x * x for x in u)
    H = [[(Fraction(1) if i == j else Fraction(0)) - 2 * u[i] * u[j] / denom
          for j in range(n)] for i in range(n)]
    return H


def rational_pinv_full_column(W):
    """(W^T W)^{-1} W^T for a full-column-rank rational matrix."""
    rows, cols = len(W), len(W[0])
    G = [[sum(W[k][i] * W[k][j] for k in range(rows)) for j in range(cols)]
         for i in range(cols)]
    # invert G by Gauss-Jordan over Fractions
    inv = [[Fraction(1) if i == j else Fraction(0) for j in range(cols)]
           for i in range(cols)]
    A = [row[:] for row in G]
    for c in range(cols):
        pivot = next(i for i in range(c, cols) if A[i][c] != 0)
        A[c], A[pivot] = A[pivot], A[c]
        inv[c], inv[pivot] = inv[pivot], inv[c]
        pv = A[c][c]
        A[c] = [x / pv for x in A[c]]
        inv[c] = [x / pv for x in inv[c]]
        for i in range(cols):
            if i != c and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[c])]
                inv[i] = [a - f * b for a, b in zip(inv[i], inv[c])]
    # pinv = inv @ W^T
    return [[sum(inv[i][k] * W[j][k] for k in range(cols)) for j in range(rows)]
            for i in range(cols)]
