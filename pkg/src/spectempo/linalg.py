"""Dense linear-algebra primitives shared by the whole toolkit.

Matrices are plain ``numpy.ndarray`` objects (C storage order).  All
vectorization in this package is column-major: ``vec(S)`` stacks the columns
of ``S``, so ``vec(v v^T) = kron(v, v)`` and the entry ``(i, j)`` of an
``n x n`` matrix lands at position ``j * n + i``.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, NonFinite, NotSymmetric

RANK_TOL_ENV = "SPECTEMPO_RANK_TOL"


def default_rank_tol(rows: int, cols: int) -> float:
    """Relative singular-value cutoff; ``SPECTEMPO_RANK_TOL`` overrides it."""
    env = os.environ.get(RANK_TOL_ENV)
    if env is not None:
        return float(env)
    return 1e-8 * max(rows, cols)


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and convert input to a finite 2-D float array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m)):
        raise NonFinite(f"{name} contains NaN or Inf")
    return m


def vec(S: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(S, dtype=float).reshape(-1, order="F")


def unvec(s: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`vec` for square matrices."""
    return np.asarray(s, dtype=float).reshape((n, n), order="F")


def diag_indices_vec(n: int) -> np.ndarray:
    """Positions of the diagonal entries inside ``vec`` of an n x n matrix."""
    return np.arange(n) * n + np.arange(n)


def offdiag_indices_vec(n: int) -> np.ndarray:
    """Positions of the off-diagonal entries inside ``vec``, increasing."""
    mask = np.ones(n * n, dtype=bool)
    mask[diag_indices_vec(n)] = False
    return np.flatnonzero(mask)


@dataclass(frozen=True)
class IndexSet:
    """Strictly increasing 0-based indices into a universe of fixed size."""

    indices: tuple
    universe: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if any(i < 0 or i >= self.universe for i in idx):
            raise IndexOutOfRange(f"index outside universe of size {self.universe}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise IndexOutOfRange("indices must be strictly increasing")

    def __len__(self):
        return len(self.indices)

    def to_array(self) -> np.ndarray:
        return np.array(self.indices, dtype=int)

    def complement(self) -> "IndexSet":
        mask = np.ones(self.universe, dtype=bool)
        mask[list(self.indices)] = False
        return IndexSet(tuple(np.flatnonzero(mask)), self.universe)


def rows(A: np.ndarray, idx: IndexSet) -> np.ndarray:
    """Select the rows of ``A`` listed in ``idx``, in order."""
    A = as_matrix(A)
    if idx.universe != A.shape[0]:
        raise IndexOutOfRange(
            f"index universe {idx.universe} does not match row count {A.shape[0]}"
        )
    return A[idx.to_array(), :] if len(idx) else np.empty((0, A.shape[1]))


def sym_eig(M: np.ndarray):
    """Eigendecomposition of a symmetric matrix.

    Returns ``(w, V)`` with eigenvalues ``w`` sorted descending (ties keep
    their ascending-order position) and orthonormal eigenvectors as the
    columns of ``V``.

    Raises
    ------
    NotSymmetric
        If ``||M - M^T||_inf > 1e-10 * ||M||_inf`` (absolute 1e-12 floor).
    """
    M = as_matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise NotSymmetric("matrix is not square")
    scale = np.abs(M).max() if M.size else 0.0
    if M.size and np.abs(M - M.T).max() > max(1e-10 * scale, 1e-12):
        raise NotSymmetric("matrix is not symmetric within tolerance")
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def pseudo_inverse(A: np.ndarray, rank_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with an explicit rank cutoff."""
    A = as_matrix(A, "A")
    if A.size == 0:
        return A.T.copy()
    if rank_tol is None:
        rank_tol = default_rank_tol(*A.shape)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    cutoff = rank_tol * (s[0] if s.size else 0.0)
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (Vt.T * inv) @ U.T


def khatri_rao(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product; column j is ``kron(A[:, j], B[:, j])``."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(
            f"column counts differ: {A.shape[1]} vs {B.shape[1]}"
        )
    n, k = A.shape
    m = B.shape[0]
    return (A[:, None, :] * B[None, :, :]).reshape(n * m, k)


def kernel_projector(W: np.ndarray, rank_tol: float | None = None) -> np.ndarray:
    """Orthogonal projector ``I - W W^+`` onto the kernel of ``W^T``."""
    W = as_matrix(W, "W")
    P = np.eye(W.shape[0]) - W @ pseudo_inverse(W, rank_tol)
    return 0.5 * (P + P.T)


def numerical_rank(A: np.ndarray, rank_tol: float | None = None) -> int:
    """Number of singular values above ``rank_tol * sigma_max``."""
    A = as_matrix(A, "A")
    if A.size == 0:
        return 0
    if rank_tol is None:
        rank_tol = default_rank_tol(*A.shape)
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rank_tol * s[0]))


def induced_inf_norm(A: np.ndarray) -> float:
    """Matrix norm induced by the vector sup norm: max row l1 norm."""
    A = as_matrix(A, "A")
    if A.size == 0:
        return 0.0
    return float(np.abs(A).sum(axis=1).max())


def induced_two_norm(A: np.ndarray) -> float:
    """Spectral norm (largest singular value)."""
    A = as_matrix(A, "A")
    if A.size == 0:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False)[0])


# ---------------------------------------------------------------------------
# serialization

def matrix_to_csv(A: np.ndarray) -> str:
    A = as_matrix(A, "A")
    buf = io.StringIO()
    writer = csv.writer(buf)
    for row in A:
        writer.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def matrix_from_csv(text: str) -> np.ndarray:
    rows_out = []
    for line in csv.reader(io.StringIO(text)):
        if not line or (len(line) == 1 and not line[0].strip()):
            continue
        if line[0].lstrip().startswith("#"):
            continue
        rows_out.append([float(x) for x in line])
    return as_matrix(np.array(rows_out, dtype=float), "csv matrix")


def matrix_to_json_dict(A: np.ndarray) -> dict:
    A = as_matrix(A, "A")
    return {"rows": A.shape[0], "cols": A.shape[1], "data": A.reshape(-1).tolist()}


def matrix_from_json_dict(d: dict) -> np.ndarray:
    data = np.array(d["data"], dtype=float).reshape(int(d["rows"]), int(d["cols"]))
    return as_matrix(data, "json matrix")
