"""Exact- and robust-recovery certificates.

Every quantity here is a deterministic function of the templates and the
candidate support: the feasibility rank tests, the dual-certificate norms
whose value below 1 guarantees that the l1 relaxation recovers the sparsest
shift, and the constants bounding the recovery error under noisy templates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .diffusion import SpectralTemplates
from .errors import (BadParameters, ConditionsFail, DegreeEigenvectorMissing,
                     SingularSystem)
from .graphs import (ADJACENCY, COMBINATORIAL_LAPLACIAN, NORMALIZED_LAPLACIAN,
                     ShiftConstraintSet, find_degree_eigenvector)

NOISELESS_ADJACENCY = "noiseless_adjacency"
NOISELESS_LAPLACIAN = "noiseless_laplacian"
INCOMPLETE_ADJACENCY = "incomplete_adjacency"
INCOMPLETE_LAPLACIAN = "incomplete_laplacian"

DEFAULT_DELTA_GRID = np.logspace(-6.0, 2.0, 33)


@dataclass(frozen=True)
class CertificateMatrices:
    """Dense matrices entering the recovery conditions for one template set."""

    kind: str
    n: int
    num_templates: int
    W: np.ndarray | None = None
    W_D: np.ndarray | None = None
    U: np.ndarray | None = None
    M: np.ndarray | None = None
    R: np.ndarray | None = None
    U_tilde: np.ndarray | None = None
    Q: np.ndarray | None = None
    B: np.ndarray | None = None
    P1: np.ndarray | None = None
    P2: np.ndarray | None = None
    P: np.ndarray | None = None
    T1: np.ndarray | None = None
    T2: np.ndarray | None = None
    T: np.ndarray | None = None
    Upsilon: np.ndarray | None = None
    degree_index: int | None = None


@dataclass(frozen=True)
class RecoveryCertificate:
    formulation: str
    rank_condition_holds: bool
    value: float
    minimizing_delta: float
    support: linalg.IndexSet
    guaranteed: bool

    def to_row(self, instance_id="") -> dict:
        return {
            "instance_id": instance_id,
            "formulation": self.formulation,
            "rank_ok": bool(self.rank_condition_holds),
            "value": float(self.value),
            "delta": float(self.minimizing_delta),
            "guaranteed": bool(self.guaranteed),
        }


@dataclass(frozen=True)
class RobustConstants:
    C1: float
    C2: float
    C3: float
    C: float
    delta: float
    based_on: str


def symmetry_rows(n: int) -> np.ndarray:
    """Rows annihilating vectorized symmetric matrices: one row per pair
    i < j with +1 at entry (i, j) and -1 at entry (j, i)."""
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            r = np.zeros(n * n)
            r[j * n + i] = 1.0
            r[i * n + j] = -1.0
            rows.append(r)
    return np.array(rows) if rows else np.zeros((0, n * n))


def scale_row(n: int, node: int = 0) -> np.ndarray:
    """Row summing column ``node`` of the vectorized matrix."""
    a = np.zeros(n * n)
    a[node * n:(node + 1) * n] = 1.0
    return a


def ones_substituted(V: np.ndarray, degree_index: int) -> np.ndarray:
    V1 = np.array(V, dtype=float)
    V1[:, degree_index] = 1.0
    return V1


def _resolve_degree_index(templates: SpectralTemplates, degree_index=None) -> int:
    if degree_index is not None:
        return int(degree_index)
    try:
        return find_degree_eigenvector(templates.V)
    except Exception as exc:
        raise DegreeEigenvectorMissing(str(exc)) from exc


def certificate_matrices(templates: SpectralTemplates, cset: ShiftConstraintSet,
                         incomplete: bool = False, degree_index=None,
                         rank_tol=None) -> CertificateMatrices:
    """Assemble the matrices behind the recovery conditions.

    With ``incomplete=False`` the templates must form a full basis and the
    full-template condition matrices are produced; with ``incomplete=True``
    the given K templates are treated as the known ones and the
    incomplete-template stack is produced instead.
    """
    V = templates.V
    n = templates.n
    K = templates.num_templates
    nvec = n * n
    D = linalg.diag_indices_vec(n)
    Dc = linalg.offdiag_indices_vec(n)

    if cset.kind == COMBINATORIAL_LAPLACIAN:
        raise BadParameters("certificates cover adjacency and normalized-Laplacian sets")

    if not incomplete:
        if K != n:
            raise BadParameters("full-template certificates need K = n")
        W = linalg.khatri_rao(V, V)
        W_D = W[D]
        proj = linalg.kernel_projector(W, rank_tol)
        M = proj[Dc]
        col = scale_row(n, cset.scale_node)[Dc]
        R = np.hstack([M, col[:, None]])
        if cset.kind == ADJACENCY:
            return CertificateMatrices(kind=cset.kind, n=n, num_templates=K,
                                       W=W, W_D=W_D, M=M, R=R)
        k0 = _resolve_degree_index(templates, degree_index)
        U = ones_substituted(V, k0) ** 2
        Vt = np.delete(V, k0, axis=1)
        U_tilde = linalg.khatri_rao(Vt, Vt)
        Q = linalg.kernel_projector(U_tilde, rank_tol)[Dc]
        return CertificateMatrices(kind=cset.kind, n=n, num_templates=K,
                                   W=W, W_D=W_D, U=U, M=M, R=R,
                                   U_tilde=U_tilde, Q=Q, degree_index=k0)

    # incomplete-template stacks
    B = symmetry_rows(n)
    Upsilon = np.hstack([np.eye(nvec), np.zeros((nvec, nvec))])
    zero_nk = np.zeros((n * K, nvec))
    orth = np.kron(np.eye(n), V.T)  # (I (x) V_K^T), rows hit s_extra
    if cset.kind == ADJACENCY:
        W_K = linalg.khatri_rao(V, V)
        proj = linalg.kernel_projector(W_K, rank_tol)
        P1 = np.vstack([proj, np.eye(nvec)[D], B, zero_nk,
                        scale_row(n, cset.scale_node)[None, :]]).T
        P2 = np.vstack([-proj, np.zeros((n, nvec)), np.zeros((B.shape[0], nvec)),
                        orth, np.zeros((1, nvec))]).T
        P = np.vstack([P1, P2])
        return CertificateMatrices(kind=cset.kind, n=n, num_templates=K,
                                   W=W_K, B=B, P1=P1, P2=P2, P=P, Upsilon=Upsilon)
    k0 = _resolve_degree_index(templates, degree_index)
    Vt = np.delete(V, k0, axis=1)
    U_tilde = linalg.khatri_rao(Vt, Vt)
    proj = linalg.kernel_projector(U_tilde, rank_tol)
    T1 = np.vstack([proj, np.eye(nvec)[D], B, zero_nk]).T
    T2 = np.vstack([-proj, np.zeros((n, nvec)), np.zeros((B.shape[0], nvec)), orth]).T
    T = np.vstack([T1, T2])
    return CertificateMatrices(kind=cset.kind, n=n, num_templates=K,
                               U_tilde=U_tilde, B=B, T1=T1, T2=T2, T=T,
                               Upsilon=Upsilon, degree_index=k0)


def feasibility_rank(templates: SpectralTemplates, cset: ShiftConstraintSet,
                     rank_tol=None, degree_index=None) -> dict:
    """Rank of the diagonal / unit-diagonal system; rank n-1 makes the
    feasible set a singleton."""
    n = templates.n
    if templates.num_templates != n:
        raise BadParameters("feasibility rank needs a full template basis")
    if cset.kind == ADJACENCY:
        W_D = linalg.khatri_rao(templates.V, templates.V)[linalg.diag_indices_vec(n)]
        rank = linalg.numerical_rank(W_D, rank_tol)
    elif cset.kind == NORMALIZED_LAPLACIAN:
        k0 = _resolve_degree_index(templates, degree_index)
        U = ones_substituted(templates.V, k0) ** 2
        rank = linalg.numerical_rank(U, rank_tol)
    else:
        raise BadParameters("feasibility rank covers adjacency and normalized Laplacian")
    return {"rank": rank, "singleton": rank == n - 1}


def dual_certificate_norm(G: np.ndarray, support, selectable: int, delta: float) -> float:
    """Worst-row l1 norm of the minimum-norm dual-certificate operator.

    ``G`` collects the constraint rows, ``support`` indexes the candidate
    nonzeros inside the first ``selectable`` coordinates, and ``delta``
    regularizes the minimum-norm system.  Values below 1 certify recovery,
    so a value is only returned below 1 when the linear solve's conditioning
    leaves no doubt; unreliable sub-1 evaluations (tiny delta makes the
    system nearly singular) raise SingularSystem instead of producing a
    false guarantee.
    """
    G = linalg.as_matrix(G, "G")
    m = G.shape[0]
    support = np.asarray(sorted(int(i) for i in support), dtype=int)
    if support.size == 0:
        return 0.0
    if np.any(support >= selectable):
        raise BadParameters("support indices must lie in the selectable range")
    mask = np.zeros(m)
    mask[:selectable] = 1.0
    mask[support] = 0.0
    big = (G @ G.T) / (delta * delta) + np.diag(mask)
    try:
        cho = scipy.linalg.cho_factor(big)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularSystem(f"certificate system singular at delta={delta}") from exc
    rhs = np.zeros((m, support.size))
    rhs[support, np.arange(support.size)] = 1.0
    X = scipy.linalg.cho_solve(cho, rhs)
    comp = np.ones(m, dtype=bool)
    comp[support] = False
    comp[selectable:] = False
    rows = X[comp]
    if rows.size == 0:
        return 0.0
    value = float(np.abs(rows).sum(axis=1).max())
    if value < 1.0:
        anorm = float(np.abs(big).sum(axis=1).max())
        rcond_arr, info = scipy.linalg.lapack.dpocon(
            cho[0], anorm, uplo=b"L" if cho[1] else b"U")
        rcond = float(rcond_arr)
        if info != 0:
            raise SingularSystem(f"condition estimate failed at delta={delta}")
        if rcond <= 0:
            raise SingularSystem(f"certificate system singular at delta={delta}")
        err = 50.0 * np.finfo(float).eps / rcond * max(value, 1.0) * max(support.size, 1)
        if err > 0.5 * (1.0 - value):
            raise SingularSystem(
                f"certificate value {value:.4f} unreliable at delta={delta} "
                f"(estimated error {err:.1e})")
    return value


def _support_offdiag(S_true: np.ndarray, edge_tol: float = 1e-12) -> np.ndarray:
    n = S_true.shape[0]
    s = linalg.vec(S_true)[linalg.offdiag_indices_vec(n)]
    return np.flatnonzero(np.abs(s) > edge_tol)


def _support_full(S_true: np.ndarray, edge_tol: float = 1e-12) -> np.ndarray:
    return np.flatnonzero(np.abs(linalg.vec(S_true)) > edge_tol)


def minimize_over_grid(G, support, selectable, delta_grid) -> tuple:
    best = np.inf
    best_delta = float(delta_grid[0])
    for d in delta_grid:
        try:
            val = dual_certificate_norm(G, support, selectable, float(d))
        except SingularSystem:
            continue
        if val < best:
            best = val
            best_delta = float(d)
    return best, best_delta


def certify_noiseless(templates: SpectralTemplates, S_true: np.ndarray,
                      cset: ShiftConstraintSet, delta_grid=None,
                      degree_index=None, rank_tol=None) -> RecoveryCertificate:
    """Exact-recovery certificate for full templates (adjacency or
    normalized Laplacian): support rank test plus the minimized
    dual-certificate norm over the delta grid."""
    if delta_grid is None:
        delta_grid = DEFAULT_DELTA_GRID
    mats = certificate_matrices(templates, cset, degree_index=degree_index,
                                rank_tol=rank_tol)
    n = templates.n
    S_true = linalg.as_matrix(S_true, "S_true")
    support = _support_offdiag(S_true)
    G = mats.R if cset.kind == ADJACENCY else mats.Q
    rank_ok = linalg.numerical_rank(G[support], rank_tol) == support.size
    value, delta = minimize_over_grid(G, support, n * n - n, delta_grid)
    formulation = NOISELESS_ADJACENCY if cset.kind == ADJACENCY else NOISELESS_LAPLACIAN
    return RecoveryCertificate(
        formulation=formulation,
        rank_condition_holds=bool(rank_ok),
        value=float(value),
        minimizing_delta=float(delta),
        support=linalg.IndexSet(tuple(support), n * n - n),
        guaranteed=bool(rank_ok and value < 1.0),
    )


def certify_incomplete(templates_K: SpectralTemplates, S_true: np.ndarray,
                       cset: ShiftConstraintSet, delta_grid=None,
                       degree_index=None, rank_tol=None) -> RecoveryCertificate:
    """Exact-recovery certificate when only K templates are known."""
    if delta_grid is None:
        delta_grid = DEFAULT_DELTA_GRID
    mats = certificate_matrices(templates_K, cset, incomplete=True,
                                degree_index=degree_index, rank_tol=rank_tol)
    n = templates_K.n
    S_true = linalg.as_matrix(S_true, "S_true")
    support = _support_full(S_true)
    if cset.kind == ADJACENCY:
        A1 = np.hstack([mats.P1[support].T, mats.P2.T])
        G = mats.P
        formulation = INCOMPLETE_ADJACENCY
    else:
        A1 = np.hstack([mats.T1[support].T, mats.T2.T])
        G = mats.T
        formulation = INCOMPLETE_LAPLACIAN
    rank_ok = linalg.numerical_rank(A1, rank_tol) == support.size + n * n
    value, delta = minimize_over_grid(G, support, n * n, delta_grid)
    return RecoveryCertificate(
        formulation=formulation,
        rank_condition_holds=bool(rank_ok),
        value=float(value),
        minimizing_delta=float(delta),
        support=linalg.IndexSet(tuple(support), n * n),
        guaranteed=bool(rank_ok and value < 1.0),
    )


def robust_constants(templates_noisy: SpectralTemplates, S_true: np.ndarray,
                     cset: ShiftConstraintSet, delta: float,
                     degree_index=None, rank_tol=None) -> RobustConstants:
    """Constants of the noisy-template recovery bound
    ``||s_hat - s_0||_1 <= C eps`` with ``C = 2 C1 + 2 C2 C3``."""
    mats = certificate_matrices(templates_noisy, cset, degree_index=degree_index,
                                rank_tol=rank_tol)
    n = templates_noisy.n
    S_true = linalg.as_matrix(S_true, "S_true")
    support = _support_offdiag(S_true)
    G = mats.R if cset.kind == ADJACENCY else mats.Q
    based_on = "R" if cset.kind == ADJACENCY else "Q"
    if linalg.numerical_rank(G[support], rank_tol) != support.size:
        raise ConditionsFail("support rows of the certificate matrix are rank-deficient")
    try:
        psi = dual_certificate_norm(G, support, n * n - n, delta)
    except SingularSystem as exc:
        raise ConditionsFail(str(exc)) from exc
    if psi >= 1.0:
        raise ConditionsFail(f"certificate norm {psi:.4f} >= 1 at delta={delta}")
    sig = np.linalg.svd(G[support], compute_uv=False)
    c1 = float(np.sqrt(support.size) / sig[-1])
    c2 = float((1.0 + linalg.induced_two_norm(G.T) * c1) / (1.0 - psi))
    c3 = float(linalg.induced_two_norm(linalg.pseudo_inverse(G, rank_tol)) * n)
    return RobustConstants(C1=c1, C2=c2, C3=c3, C=2.0 * c1 + 2.0 * c2 * c3,
                           delta=float(delta), based_on=based_on)
