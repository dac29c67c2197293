"""Recovery metrics and the two reference baselines: thresholded
correlation and closed-form network deconvolution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .diffusion import SignalEnsemble, sample_covariance
from .errors import BadParameters, DegenerateVariance, DimensionMismatch, SingularShift


@dataclass(frozen=True)
class RecoveryScore:
    f_measure: float
    precision: float
    recall: float
    edge_error_l2: float
    degree_error_l2: float
    misidentified_fraction: float


def _offdiag_upper(S: np.ndarray):
    iu = np.triu_indices(S.shape[0], k=1)
    return S[iu]


def score(S_hat: np.ndarray, S_true: np.ndarray, edge_tol: float = 1e-6) -> RecoveryScore:
    """Support and weight agreement between an estimate and the truth.

    Degrees are the row sums of off-diagonal magnitudes, which equal the
    weighted degrees for adjacency matrices and remain meaningful for
    Laplacians (whose plain row sums vanish).
    """
    S_hat = linalg.as_matrix(S_hat, "S_hat")
    S_true = linalg.as_matrix(S_true, "S_true")
    if S_hat.shape != S_true.shape:
        raise DimensionMismatch(f"{S_hat.shape} vs {S_true.shape}")
    w_hat = _offdiag_upper(S_hat)
    w_true = _offdiag_upper(S_true)
    est = np.abs(w_hat) > edge_tol
    true = np.abs(w_true) > edge_tol
    tp = int(np.sum(est & true))
    fp = int(np.sum(est & ~true))
    fn = int(np.sum(~est & true))
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    denom = np.linalg.norm(w_true)
    edge_err = float(np.linalg.norm(w_hat - w_true) / denom) if denom > 0 else float(
        np.linalg.norm(w_hat) > 0)
    off = ~np.eye(S_true.shape[0], dtype=bool)
    d_true = np.abs(S_true * off).sum(axis=1)
    d_hat = np.abs(S_hat * off).sum(axis=1)
    dden = np.linalg.norm(d_true)
    deg_err = float(np.linalg.norm(d_hat - d_true) / dden) if dden > 0 else float(
        np.linalg.norm(d_hat) > 0)
    misid = (fp + fn) / true.sum() if true.sum() else float(fp > 0)
    return RecoveryScore(
        f_measure=float(f), precision=float(precision), recall=float(recall),
        edge_error_l2=edge_err, degree_error_l2=deg_err,
        misidentified_fraction=float(misid))


def correlation_matrix(X: SignalEnsemble) -> np.ndarray:
    """Absolute sample correlation with a zeroed diagonal."""
    if X.num_samples < 2:
        raise BadParameters("need at least two samples")
    C = sample_covariance(X).C
    v = np.diag(C)
    if np.any(v <= 0):
        raise DegenerateVariance("zero-variance coordinate")
    R = np.abs(C / np.sqrt(np.outer(v, v)))
    np.fill_diagonal(R, 0.0)
    return np.clip(R, 0.0, 1.0)


def correlation_baseline(X: SignalEnsemble, threshold: float) -> np.ndarray:
    """Thresholded absolute correlation graph."""
    R = correlation_matrix(X)
    R[R < threshold] = 0.0
    return R


def tune_correlation_threshold(train, grid=None) -> float:
    """Pick the threshold with the best mean F-measure on training pairs
    ``(ensemble, true_shift)``."""
    if grid is None:
        grid = np.arange(0.05, 0.951, 0.05)
    best_t, best_f = float(grid[0]), -1.0
    for t in grid:
        fs = []
        for X, S_true in train:
            fs.append(score(correlation_baseline(X, float(t)), S_true).f_measure)
        mean_f = float(np.mean(fs)) if fs else 0.0
        if mean_f > best_f:
            best_f, best_t = mean_f, float(t)
    return best_t


def network_deconvolution(T: np.ndarray) -> np.ndarray:
    """Direct-dependency matrix ``T (I + T)^{-1}`` of an observed matrix
    ``T`` of total (direct plus indirect) dependencies."""
    T = linalg.as_matrix(T, "T")
    n = T.shape[0]
    try:
        out = np.linalg.solve(np.eye(n) + T.T, T.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularShift("I + T is singular") from exc
    if not np.all(np.isfinite(out)):
        raise SingularShift("I + T is numerically singular")
    return out


def top_k_recovery(S_hat: np.ndarray, S_true: np.ndarray, k: int,
                   edge_tol: float = 1e-6) -> float:
    """Fraction of true edges found among the k largest-weight predictions.

    Ties break lexicographically by (i, j) for determinism.
    """
    S_hat = linalg.as_matrix(S_hat, "S_hat")
    S_true = linalg.as_matrix(S_true, "S_true")
    if S_hat.shape != S_true.shape:
        raise DimensionMismatch(f"{S_hat.shape} vs {S_true.shape}")
    n = S_hat.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    if k > iu.size:
        raise BadParameters(f"k={k} exceeds the {iu.size} node pairs")
    true_edges = np.abs(S_true[iu, ju]) > edge_tol
    total = int(true_edges.sum())
    if total == 0 or k == 0:
        return 0.0
    order = np.lexsort((ju, iu, -np.abs(S_hat[iu, ju])))
    hits = int(true_edges[order[:k]].sum())
    return hits / total
