"""Graph filters and the signal pipeline: diffuse white noise through a
filter, estimate the sample covariance, and extract its eigenvectors as
spectral templates for a shift operator."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import BadParameters, IncompleteBasis, NotSymmetric
from .graphs import Gso

POLYNOMIAL = "polynomial"
SPECTRAL = "spectral"
PRECISION_ROOT = "precision_root"
INVERSE_LAPLACIAN_ROOT = "inverse_laplacian_root"
AR_DIFFUSION = "ar_diffusion"
EXPONENTIAL = "exponential"

PROVENANCE_EXACT = "exact"
PROVENANCE_SAMPLE = "sample_covariance"
PROVENANCE_FILE = "file"


@dataclass(frozen=True)
class GraphFilter:
    """A linear filter ``H`` acting on signals supported on a graph.

    ``basis_eigenvalues`` / ``basis_eigenvectors`` hold the
    eigendecomposition of the shift (or template basis) the filter was built
    from; ``response`` is the per-frequency gain, so ``H = V diag(response) V^T``.
    """

    form: str
    H: np.ndarray
    basis_eigenvalues: np.ndarray
    basis_eigenvectors: np.ndarray
    response: np.ndarray
    coefficients: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def output_covariance(self) -> np.ndarray:
        """Covariance of ``H w`` for white unit-variance input: ``H H^T``."""
        return self.H @ self.H.T


@dataclass(frozen=True)
class SignalEnsemble:
    """``P`` signals of dimension ``n``, stored one sample per row."""

    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", linalg.as_matrix(self.samples, "samples"))

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class CovarianceEstimate:
    C: np.ndarray
    num_samples: int = 0  # 0 means exact / ensemble covariance

    def __post_init__(self):
        C = linalg.as_matrix(self.C, "C")
        scale = np.abs(C).max(initial=0.0)
        if C.size and np.abs(C - C.T).max() > max(1e-10 * scale, 1e-12):
            raise NotSymmetric("covariance not symmetric")
        object.__setattr__(self, "C", 0.5 * (C + C.T))


@dataclass(frozen=True)
class SpectralTemplates:
    """Ordered, sign-normalized eigenvector templates.

    ``V`` has orthonormal columns sorted by descending ``eigenvalue_estimates``
    (the covariance eigenvalues).  ``groups`` partitions the columns into runs
    of (numerically) repeated eigenvalues; columns in non-singleton groups are
    only determined up to rotation and should be dropped before full-template
    inference.
    """

    V: np.ndarray
    eigenvalue_estimates: np.ndarray
    groups: tuple
    provenance: str = PROVENANCE_EXACT

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def num_templates(self) -> int:
        return self.V.shape[1]

    def reliable_columns(self) -> np.ndarray:
        """Columns in singleton groups (well-separated eigenvalues)."""
        return np.array(sorted(g[0] for g in self.groups if len(g) == 1), dtype=int)

    def subset(self, cols) -> "SpectralTemplates":
        cols = np.asarray(cols, dtype=int)
        groups = tuple((int(np.flatnonzero(cols == c)[0]),) for c in cols)
        return SpectralTemplates(
            self.V[:, cols],
            self.eigenvalue_estimates[cols],
            groups,
            self.provenance,
        )

    def sorted_ascending(self) -> "SpectralTemplates":
        order = np.argsort(self.eigenvalue_estimates, kind="stable")
        return self.subset(order)


def normalize_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry is positive (first such
    entry decides ties)."""
    V = np.array(V, dtype=float)
    for k in range(V.shape[1]):
        lead = int(np.argmax(np.abs(V[:, k])))
        if V[lead, k] < 0:
            V[:, k] = -V[:, k]
    return V


def exact_templates(S: Gso | np.ndarray) -> SpectralTemplates:
    """Templates from the exact eigendecomposition of a shift operator.

    Ordering follows the convention used everywhere else: descending by the
    eigenvalue estimate, which for an exact shift is the shift eigenvalue.
    """
    M = S.matrix if isinstance(S, Gso) else S
    w, V = linalg.sym_eig(M)
    groups = _group_columns(w, 1e-9)
    return SpectralTemplates(normalize_signs(V), w, groups, PROVENANCE_EXACT)


def polynomial_filter(S: Gso, h) -> GraphFilter:
    """``H = sum_l h[l] S^l`` evaluated by Horner's rule."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.size < 1:
        raise BadParameters("need at least one filter coefficient")
    M = linalg.as_matrix(S.matrix, "S")
    n = M.shape[0]
    H = np.eye(n) * h[-1]
    for c in h[-2::-1]:
        H = H @ M + np.eye(n) * c
    w, V = linalg.sym_eig(M)
    response = np.polyval(h[::-1], w)
    return GraphFilter(POLYNOMIAL, H, w, V, response, coefficients=h)


def spectral_filter(T: SpectralTemplates, response) -> GraphFilter:
    """``H = V diag(response) V^T`` on a full template basis."""
    response = np.asarray(response, dtype=float)
    if T.num_templates != T.n:
        raise IncompleteBasis("spectral filter needs a full basis (K = n)")
    if response.shape != (T.n,):
        raise BadParameters(f"response must have length {T.n}")
    H = (T.V * response) @ T.V.T
    return GraphFilter(SPECTRAL, H, T.eigenvalue_estimates.copy(), T.V.copy(), response)


def precision_root_filter(S: Gso, margin: float = 1.0) -> GraphFilter:
    """``H = (delta I + S)^{-1/2}`` with delta chosen so the shift is PD.

    The filtered signals then have precision matrix ``delta I + S``, which
    matches the shift off the diagonal.
    """
    w, V = linalg.sym_eig(S.matrix)
    delta = max(0.0, -float(w.min())) + margin
    response = 1.0 / np.sqrt(delta + w)
    H = (V * response) @ V.T
    return GraphFilter(PRECISION_ROOT, H, w, V, response)


def smooth_signal_model(L: Gso, model: str) -> GraphFilter:
    """Filters whose outputs are smooth with respect to a Laplacian ``L``.

    ``inverse_laplacian_root``: output covariance is the pseudo-inverse of L.
    ``ar_diffusion``: ``H = (I + L)^{-1}``.  ``exponential``: ``H = exp(-L)``.
    """
    w, V = linalg.sym_eig(L.matrix)
    if model == INVERSE_LAPLACIAN_ROOT:
        tol = linalg.default_rank_tol(*L.matrix.shape) * max(
            abs(float(w.max(initial=0.0))), 1.0
        )
        response = np.where(w > tol, 1.0 / np.sqrt(np.where(w > tol, w, 1.0)), 0.0)
    elif model == AR_DIFFUSION:
        response = 1.0 / (1.0 + w)
    elif model == EXPONENTIAL:
        response = np.exp(-w)
    else:
        raise BadParameters(f"unknown smooth-signal model {model!r}")
    H = (V * response) @ V.T
    return GraphFilter(model, H, w, V, response)


def psd(F: GraphFilter) -> np.ndarray:
    """Per-frequency power of the filter output under white input."""
    return F.response**2


def diffuse(F: GraphFilter, P: int, seed) -> SignalEnsemble:
    """``P`` independent samples ``H w`` with ``w`` standard Gaussian."""
    if P < 1:
        raise BadParameters("need at least one sample")
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((P, F.n))
    return SignalEnsemble(W @ F.H.T)


def perturb(X: SignalEnsemble, sigma: float, seed) -> SignalEnsemble:
    """Multiplicative noise ``x_i (1 + sigma z_i)`` with z standard normal."""
    if sigma < 0:
        raise BadParameters("sigma must be nonnegative")
    if sigma == 0.0:
        return SignalEnsemble(X.samples.copy())
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal(X.samples.shape)
    return SignalEnsemble(X.samples * (1.0 + sigma * Z))


def sample_covariance(X: SignalEnsemble) -> CovarianceEstimate:
    """Zero-mean sample covariance ``(1/P) sum x_p x_p^T`` (no centering)."""
    P = X.num_samples
    if P < 1:
        raise BadParameters("need at least one sample")
    C = X.samples.T @ X.samples / P
    return CovarianceEstimate(0.5 * (C + C.T), num_samples=P)


def _group_columns(eigenvalues: np.ndarray, group_tol: float) -> tuple:
    """Group consecutive sorted eigenvalues with small relative gaps."""
    groups = []
    current = [0]
    scale = max(float(np.abs(eigenvalues).max(initial=0.0)), 1e-300)
    for k in range(1, eigenvalues.size):
        gap = abs(eigenvalues[k - 1] - eigenvalues[k])
        if gap < group_tol * max(abs(eigenvalues[k - 1]), abs(eigenvalues[k]), 1e-12 * scale):
            current.append(k)
        else:
            groups.append(tuple(current))
            current = [k]
    if eigenvalues.size:
        groups.append(tuple(current))
    return tuple(groups)


def extract_templates(C: CovarianceEstimate, group_tol: float = 1e-6) -> SpectralTemplates:
    """Eigenvectors of the covariance, sorted by descending eigenvalue and
    sign-normalized, with repeated-eigenvalue groups flagged."""
    w, V = linalg.sym_eig(C.C)
    groups = _group_columns(w, group_tol)
    provenance = PROVENANCE_SAMPLE if C.num_samples > 0 else PROVENANCE_EXACT
    return SpectralTemplates(normalize_signs(V), w, groups, provenance)


# ---------------------------------------------------------------------------
# serialization

def ensemble_to_csv(X: SignalEnsemble) -> str:
    return linalg.matrix_to_csv(X.samples)


def ensemble_from_csv(text: str) -> SignalEnsemble:
    return SignalEnsemble(linalg.matrix_from_csv(text))


def templates_to_files(T: SpectralTemplates):
    """Returns ``(v_csv, sidecar_json)`` strings."""
    sidecar = {
        "eigenvalues": T.eigenvalue_estimates.tolist(),
        "groups": [list(g) for g in T.groups],
        "provenance": T.provenance,
    }
    return linalg.matrix_to_csv(T.V), json.dumps(sidecar, indent=2)


def templates_from_files(v_csv: str, sidecar_json: str | None = None) -> SpectralTemplates:
    """Ingestion point for externally supplied templates (orthonormal
    transforms, filter-design targets, eigenvectors of an observed shift)."""
    V = linalg.matrix_from_csv(v_csv)
    if sidecar_json is not None:
        d = json.loads(sidecar_json)
        eigs = np.asarray(d["eigenvalues"], dtype=float)
        groups = tuple(tuple(int(i) for i in g) for g in d["groups"])
        provenance = d.get("provenance", PROVENANCE_FILE)
    else:
        eigs = np.arange(V.shape[1], 0.0, -1.0)
        groups = tuple((k,) for k in range(V.shape[1]))
        provenance = PROVENANCE_FILE
    return SpectralTemplates(normalize_signs(V), eigs, groups, provenance)


def templates_from_matrix(M: np.ndarray, group_tol: float = 1e-6) -> SpectralTemplates:
    """Templates from the eigenvectors of an arbitrary symmetric matrix, e.g.
    an observed dependency matrix whose direct part is sought."""
    w, V = linalg.sym_eig(M)
    T = SpectralTemplates(normalize_signs(V), w, _group_columns(w, group_tol), PROVENANCE_FILE)
    return T
