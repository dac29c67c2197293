"""Build the recovery programs for each formulation, run the solver, and
post-process the result into a shift-operator estimate."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg, solver
from .certificates import scale_row, symmetry_rows
from .diffusion import SpectralTemplates
from .errors import (BadParameters, DegreeEigenvectorMissing, IncompleteBasis,
                     NotSymmetric)
from .graphs import (ADJACENCY, COMBINATORIAL_LAPLACIAN, NORMALIZED_LAPLACIAN,
                     ShiftConstraintSet, find_degree_eigenvector,
                     same_sign_violation)

AUTO = "auto"


@dataclass(frozen=True)
class GsoEstimate:
    """Recovered shift with the solver's byproducts."""

    S: np.ndarray
    lam: np.ndarray
    S_prime: np.ndarray | None = None
    S_bar: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.S.shape[0]

    def to_json(self) -> str:
        return json.dumps({
            "S": linalg.matrix_to_json_dict(self.S),
            "lambda": self.lam.tolist(),
            "S_prime": None if self.S_prime is None else linalg.matrix_to_json_dict(self.S_prime),
            "S_bar": None if self.S_bar is None else linalg.matrix_to_json_dict(self.S_bar),
            "diagnostics": self.diagnostics,
        })


@dataclass(frozen=True)
class InferenceRequest:
    """Configuration record for the command-line surface."""

    templates: SpectralTemplates
    cset: ShiftConstraintSet
    formulation: str = "noiseless"
    objective: str = solver.WEIGHTED_L1
    epsilon: object = None  # float or "auto"
    distance: str = solver.DISTANCE_FROBENIUS
    tau: float = 1.0
    delta_rw: float = 1e-3
    reweight_iters: int = 10
    threshold: float | None = None
    relax_signs: bool = False
    lag: int = 3
    gap: float = 0.1


def _check_templates(templates: SpectralTemplates):
    V = templates.V
    G = V.T @ V
    if np.abs(G - np.eye(V.shape[1])).max(initial=0.0) > 1e-8:
        raise NotSymmetric("templates are not orthonormal within 1e-8")


def _degree_index(templates: SpectralTemplates, diagnostics: dict) -> int:
    """Identify the same-sign template; fall back to the least-violating
    column for noisy templates and record the fallback."""
    try:
        return find_degree_eigenvector(templates.V)
    except Exception:
        viol = same_sign_violation(templates.V)
        diagnostics["degree_fallback"] = True
        diagnostics["degree_violation"] = float(viol.min())
        return int(np.argmin(viol))


def _set_structure(cset: ShiftConstraintSet, templates: SpectralTemplates,
                   relax_signs: bool, diagnostics: dict, soft_scale: bool = False):
    """Pins, bounds, hard rows, and lambda constraints encoding membership."""
    n = templates.n
    K = templates.num_templates
    nvec = n * n
    D = linalg.diag_indices_vec(n)
    lower = np.full(nvec, -np.inf)
    upper = np.full(nvec, np.inf)
    pins = []
    hard = []
    soft = []
    lam_pins = []
    lam_lower = None

    if cset.kind == ADJACENCY:
        pins += [(int(i), 0.0) for i in D]
        if not relax_signs:
            lower[:] = 0.0
        row = scale_row(n, cset.scale_node)
        if soft_scale:
            soft.append((row, 1.0))
        else:
            hard.append((row, 1.0))
    elif cset.kind == NORMALIZED_LAPLACIAN:
        pins += [(int(i), 1.0) for i in D]
        if not relax_signs:
            off = linalg.offdiag_indices_vec(n)
            lower[off] = -1.0
            upper[off] = 0.0
        k0 = _degree_index(templates, diagnostics)
        lam_pins.append((k0, 0.0))
        lam_lower = np.zeros(K)
        diagnostics["degree_index"] = int(k0)
    elif cset.kind == COMBINATORIAL_LAPLACIAN:
        if not relax_signs:
            off = linalg.offdiag_indices_vec(n)
            upper[off] = 0.0
        for i in range(n):
            row = np.zeros(nvec)
            row[np.arange(n) * n + i] = 1.0
            hard.append((row, 0.0))
        lam_lower = np.zeros(K)
    for (i, j, v) in cset.known_entries:
        pins.append((int(j) * n + int(i), float(v)))
        pins.append((int(i) * n + int(j), float(v)))

    lam_gaps = []
    if cset.ordering is not None:
        lag, gap = cset.ordering.lag, cset.ordering.gap
        for i in range(K - lag):
            lam_gaps.append((i, i + lag, gap))

    if np.all(np.isinf(lower)) and np.all(np.isinf(upper)):
        lower_arr = upper_arr = None
    else:
        lower_arr, upper_arr = lower, upper
    return {
        "pins": tuple(pins),
        "lower": lower_arr,
        "upper": upper_arr,
        "hard": hard,
        "soft": tuple(soft),
        "lam_pins": tuple(lam_pins),
        "lam_lower": lam_lower,
        "lam_gaps": tuple(lam_gaps),
    }


def _estimate_from_solution(sol: solver.Solution, n: int, basis=None,
                            extra_epsilon=None, diagnostics=None) -> GsoEstimate:
    diag = dict(diagnostics or {})
    diag.update({
        "status": sol.status,
        "iterations": sol.iterations,
        "objective_value": sol.objective_value,
        "primal_residual": sol.primal_residual,
        "dual_residual": sol.dual_residual,
    })
    if extra_epsilon is not None:
        diag["epsilon"] = float(extra_epsilon)
    S = linalg.unvec(sol.s, n)
    S = 0.5 * (S + S.T)
    S_prime = None
    if basis is not None:
        sp = basis @ sol.lam
        if sol.s_extra is not None:
            sp = sp + sol.s_extra
        S_prime = linalg.unvec(sp, n)
    S_bar = None if sol.s_extra is None else linalg.unvec(sol.s_extra, n)
    return GsoEstimate(S=S, lam=sol.lam.copy(), S_prime=S_prime, S_bar=S_bar,
                       diagnostics=diag)


# ---------------------------------------------------------------------------
# formulations

def noiseless_problem(templates: SpectralTemplates, cset: ShiftConstraintSet,
                      relax_signs: bool = False, diagnostics=None) -> solver.SparseRecoveryProblem:
    _check_templates(templates)
    if templates.num_templates != templates.n:
        raise IncompleteBasis("noiseless formulation needs a full basis")
    diagnostics = diagnostics if diagnostics is not None else {}
    st = _set_structure(cset, templates, relax_signs, diagnostics)
    W = linalg.khatri_rao(templates.V, templates.V)
    return solver.SparseRecoveryProblem(
        n_vec=templates.n ** 2, basis=W, pins=st["pins"],
        lower=st["lower"], upper=st["upper"],
        linear_equalities=tuple(st["hard"]),
        lambda_pins=st["lam_pins"], lambda_lower=st["lam_lower"],
        lambda_gaps=st["lam_gaps"])


def infer_noiseless(templates: SpectralTemplates, cset: ShiftConstraintSet,
                    options: solver.SolverOptions | None = None,
                    relax_signs: bool = False) -> GsoEstimate:
    diagnostics = {}
    problem = noiseless_problem(templates, cset, relax_signs, diagnostics)
    sol = solver.solve(problem, options)
    return _estimate_from_solution(sol, templates.n, diagnostics=diagnostics)


def infer_reweighted(templates: SpectralTemplates, cset: ShiftConstraintSet,
                     tau: float = 1.0, delta_rw: float = 1e-3, iters: int = 10,
                     options: solver.SolverOptions | None = None,
                     problem: solver.SparseRecoveryProblem | None = None,
                     support_tol: float = 1e-6) -> GsoEstimate:
    """Iteratively re-weighted l1: weights start uniform and update to
    ``tau / (|S_ij| + delta_rw)``; stops when the support repeats."""
    diagnostics = {}
    if problem is None:
        problem = noiseless_problem(templates, cset, False, diagnostics)
    n = templates.n
    weights = np.ones(problem.n_vec)
    prev_support = None
    sol = None
    rounds = 0
    for rounds in range(1, iters + 1):
        sol = solver.solve(problem, options, weights_override=weights)
        support = frozenset(np.flatnonzero(np.abs(sol.s) > support_tol).tolist())
        if support == prev_support:
            break
        prev_support = support
        weights = tau / (np.abs(sol.s) + delta_rw)
    diagnostics["reweight_rounds"] = rounds
    return _estimate_from_solution(sol, n, diagnostics=diagnostics)


def noisy_problem(templates: SpectralTemplates, cset: ShiftConstraintSet,
                  epsilon: float, distance: str = solver.DISTANCE_FROBENIUS,
                  relax_signs: bool = False, scale_in_ball: bool = False,
                  diagnostics=None, lam_overrides=None) -> solver.SparseRecoveryProblem:
    _check_templates(templates)
    if templates.num_templates != templates.n:
        raise IncompleteBasis("noisy formulation needs a full basis")
    diagnostics = diagnostics if diagnostics is not None else {}
    n = templates.n
    st = _set_structure(cset, templates, relax_signs, diagnostics,
                        soft_scale=scale_in_ball)
    if lam_overrides is not None:
        st.update(lam_overrides)
    W = linalg.khatri_rao(templates.V, templates.V)
    hard = list(st["hard"])
    hard += [(row, 0.0) for row in symmetry_rows(n)]
    return solver.SparseRecoveryProblem(
        n_vec=n * n, basis=W, pins=st["pins"],
        lower=st["lower"], upper=st["upper"],
        linear_equalities=tuple(hard),
        lambda_pins=st["lam_pins"], lambda_lower=st["lam_lower"],
        lambda_gaps=st["lam_gaps"],
        ball=solver.Ball(float(epsilon), distance, st["soft"]))


def _resolve_epsilon(problem, epsilon, options) -> float:
    if epsilon == AUTO or epsilon is None:
        return solver.min_feasible_epsilon(problem, options)
    return float(epsilon)


def infer_noisy(templates: SpectralTemplates, cset: ShiftConstraintSet,
                epsilon=AUTO, distance: str = solver.DISTANCE_FROBENIUS,
                options: solver.SolverOptions | None = None,
                relax_signs: bool = False, scale_in_ball: bool = False,
                reweight_iters: int = 0, lam_overrides=None) -> GsoEstimate:
    """Recovery from approximate templates: the estimate stays within
    ``epsilon`` of some shift the templates diagonalize exactly."""
    diagnostics = {}
    probe = noisy_problem(templates, cset, 1.0, distance, relax_signs,
                          scale_in_ball, diagnostics, lam_overrides)
    eps = _resolve_epsilon(probe, epsilon, options)
    problem = solver.SparseRecoveryProblem(
        **{**probe.__dict__, "ball": solver.Ball(eps, distance, probe.ball.soft_linear)})
    sol = solver.solve(problem, options)
    if reweight_iters > 0:
        s = sol.s
        for _ in range(reweight_iters):
            sol = solver.solve(problem, options,
                               weights_override=1.0 / (np.abs(s) + 1e-3))
            s = sol.s
        diagnostics["reweight_rounds"] = reweight_iters
    return _estimate_from_solution(sol, templates.n, basis=problem.basis,
                                   extra_epsilon=eps, diagnostics=diagnostics)


def incomplete_problem(templates_K: SpectralTemplates, cset: ShiftConstraintSet,
                       epsilon: float | None = None,
                       distance: str = solver.DISTANCE_FROBENIUS,
                       relax_signs: bool = False,
                       diagnostics=None) -> solver.SparseRecoveryProblem:
    _check_templates(templates_K)
    diagnostics = diagnostics if diagnostics is not None else {}
    n = templates_K.n
    if cset.kind == NORMALIZED_LAPLACIAN:
        try:
            find_degree_eigenvector(templates_K.V)
        except Exception as exc:
            raise DegreeEigenvectorMissing(
                "the same-sign eigenvector must be among the known templates") from exc
    st = _set_structure(cset, templates_K, relax_signs, diagnostics)
    W_K = linalg.khatri_rao(templates_K.V, templates_K.V)
    hard = list(st["hard"])
    hard += [(row, 0.0) for row in symmetry_rows(n)]
    orth = np.kron(np.eye(n), templates_K.V.T)
    ball = None
    if epsilon is not None:
        ball = solver.Ball(float(epsilon), distance, st["soft"])
    return solver.SparseRecoveryProblem(
        n_vec=n * n, basis=W_K, pins=st["pins"],
        lower=st["lower"], upper=st["upper"],
        linear_equalities=tuple(hard),
        lambda_pins=st["lam_pins"], lambda_lower=st["lam_lower"],
        lambda_gaps=st["lam_gaps"], ball=ball,
        extra=solver.ExtraBlock(orth, np.zeros(orth.shape[0])))


def infer_incomplete(templates_K: SpectralTemplates, cset: ShiftConstraintSet,
                     options: solver.SolverOptions | None = None,
                     relax_signs: bool = False) -> GsoEstimate:
    """Recovery when only K of the n eigenvectors are known; the unknown
    spectral component is a free block orthogonal to the known templates.

    A full basis forces that component to zero, so K = n dispatches to the
    full-template program directly.
    """
    if templates_K.num_templates == templates_K.n:
        est = infer_noiseless(templates_K, cset, options, relax_signs)
        est.diagnostics["reduced_full_basis"] = True
        return GsoEstimate(S=est.S, lam=est.lam, S_prime=est.S_prime,
                           S_bar=np.zeros_like(est.S),
                           diagnostics=est.diagnostics)
    diagnostics = {}
    problem = incomplete_problem(templates_K, cset, None,
                                 relax_signs=relax_signs, diagnostics=diagnostics)
    sol = solver.solve(problem, options)
    return _estimate_from_solution(sol, templates_K.n, diagnostics=diagnostics)


def infer_incomplete_noisy(templates_K: SpectralTemplates, cset: ShiftConstraintSet,
                           epsilon=AUTO, distance: str = solver.DISTANCE_FROBENIUS,
                           options: solver.SolverOptions | None = None,
                           relax_signs: bool = False) -> GsoEstimate:
    if templates_K.num_templates == templates_K.n:
        est = infer_noisy(templates_K, cset, epsilon, distance, options,
                          relax_signs)
        est.diagnostics["reduced_full_basis"] = True
        return GsoEstimate(S=est.S, lam=est.lam, S_prime=est.S_prime,
                           S_bar=np.zeros_like(est.S),
                           diagnostics=est.diagnostics)
    diagnostics = {}
    probe = incomplete_problem(templates_K, cset, 1.0, distance,
                               relax_signs, diagnostics)
    eps = _resolve_epsilon(probe, epsilon, options)
    problem = solver.SparseRecoveryProblem(
        **{**probe.__dict__, "ball": solver.Ball(eps, distance, probe.ball.soft_linear)})
    sol = solver.solve(problem, options)
    return _estimate_from_solution(sol, templates_K.n, basis=problem.basis,
                                   extra_epsilon=eps, diagnostics=diagnostics)


def infer_smooth_laplacian(templates: SpectralTemplates, lag: int = 3,
                           gap: float = 0.1, epsilon=AUTO,
                           options: solver.SolverOptions | None = None,
                           reweight_iters: int = 0) -> GsoEstimate:
    """Combinatorial-Laplacian recovery from smooth signals.

    Templates are sorted ascending by covariance eigenvalue so the least
    expressed frequencies receive the largest recovered eigenvalues, through
    the chain constraints ``lam[i] >= lam[i + lag] + gap``.  The template
    closest to the constant vector spans the Laplacian's null space (row sums
    are zero), so it is pinned to eigenvalue zero and left out of the chains;
    the remaining eigenvalues sit at least one gap above it.
    """
    asc = templates.sorted_ascending()
    cset = ShiftConstraintSet(COMBINATORIAL_LAPLACIAN)
    n = asc.n
    K = asc.num_templates
    const_dir = np.ones(n) / np.sqrt(n)
    k_const = int(np.argmax(np.abs(asc.V.T @ const_dir)))
    others = [k for k in range(K) if k != k_const]
    gaps = [(others[i], others[i + lag], float(gap))
            for i in range(len(others) - lag)]
    lam_lower = np.zeros(K)
    lam_lower[others] = float(gap)
    overrides = {
        "lam_pins": ((k_const, 0.0),),
        "lam_lower": lam_lower,
        "lam_gaps": tuple(gaps),
    }
    est = infer_noisy(asc, cset, epsilon=epsilon, options=options,
                      reweight_iters=reweight_iters, lam_overrides=overrides)
    est.diagnostics["null_template_index"] = k_const
    return est


def unique_feasible_point(templates: SpectralTemplates, cset: ShiftConstraintSet,
                          rank_tol=None) -> GsoEstimate | None:
    """Closed-form recovery when the feasible set is a singleton.

    Returns None when the rank test fails (multiple feasible shifts) or the
    scale cannot be resolved.
    """
    from .certificates import feasibility_rank, ones_substituted
    _check_templates(templates)
    n = templates.n
    V = templates.V
    if templates.num_templates != n:
        raise IncompleteBasis("the closed form needs a full basis")
    if cset.kind == ADJACENCY:
        W = linalg.khatri_rao(V, V)
        W_D = W[linalg.diag_indices_vec(n)]
        if linalg.numerical_rank(W_D, rank_tol) != n - 1:
            return None
        lam = np.linalg.svd(W_D)[2][-1]
        s = W @ lam
        t = float(scale_row(n, cset.scale_node) @ s)
        if abs(t) < 1e-12:
            return None
        lam = lam / t
        S = linalg.unvec(W @ lam, n)
        return GsoEstimate(S=0.5 * (S + S.T), lam=lam,
                           diagnostics={"method": "feasibility_singleton"})
    if cset.kind == NORMALIZED_LAPLACIAN:
        diagnostics = {"method": "feasibility_singleton"}
        k0 = _degree_index(templates, diagnostics)
        U = ones_substituted(V, k0) ** 2
        if linalg.numerical_rank(U, rank_tol) != n - 1:
            return None
        u = np.linalg.svd(U)[2][-1]
        if abs(u[k0]) < 1e-12:
            return None
        lam = u / (-u[k0])
        lam[k0] = 0.0
        S = (V * lam) @ V.T
        diagnostics["degree_index"] = int(k0)
        return GsoEstimate(S=0.5 * (S + S.T), lam=lam, diagnostics=diagnostics)
    raise BadParameters("closed form covers adjacency and normalized Laplacian")


def threshold_unweighted(est: GsoEstimate, t: float, binarize: bool = False) -> GsoEstimate:
    """Zero every off-diagonal entry below ``t`` in magnitude; optionally
    binarize the survivors."""
    if t < 0:
        raise BadParameters("threshold must be nonnegative")
    S = est.S.copy()
    off = ~np.eye(S.shape[0], dtype=bool)
    small = (np.abs(S) < t) & off
    S[small] = 0.0
    if binarize:
        S[off & (S != 0.0)] = np.sign(S[off & (S != 0.0)])
    diag = dict(est.diagnostics)
    diag["threshold"] = float(t)
    return GsoEstimate(S=S, lam=est.lam, S_prime=est.S_prime, S_bar=est.S_bar,
                       diagnostics=diag)


def rescale_max_offdiag(est: GsoEstimate) -> GsoEstimate:
    """Rescale so the largest off-diagonal magnitude is 1 (fixes the scale
    ambiguity before thresholding unweighted-graph estimates)."""
    S = est.S.copy()
    off = ~np.eye(S.shape[0], dtype=bool)
    m = np.abs(S[off]).max(initial=0.0)
    if m > 0:
        S = S / m
    return GsoEstimate(S=S, lam=est.lam / m if m > 0 else est.lam,
                       S_prime=est.S_prime, S_bar=est.S_bar,
                       diagnostics=dict(est.diagnostics))


def infer(request: InferenceRequest,
          options: solver.SolverOptions | None = None) -> GsoEstimate:
    """Dispatch an inference request to the matching formulation."""
    opts = options or solver.SolverOptions(objective=request.objective)
    f = request.formulation
    if f == "noiseless":
        est = infer_noiseless(request.templates, request.cset, opts,
                              request.relax_signs)
    elif f == "reweighted":
        est = infer_reweighted(request.templates, request.cset, request.tau,
                               request.delta_rw, request.reweight_iters, opts)
    elif f == "noisy":
        est = infer_noisy(request.templates, request.cset,
                          request.epsilon if request.epsilon is not None else AUTO,
                          request.distance, opts, request.relax_signs)
    elif f == "incomplete":
        est = infer_incomplete(request.templates, request.cset, opts,
                               request.relax_signs)
    elif f == "incomplete_noisy":
        est = infer_incomplete_noisy(request.templates, request.cset,
                                     request.epsilon if request.epsilon is not None else AUTO,
                                     request.distance, opts)
    elif f == "smooth_laplacian":
        est = infer_smooth_laplacian(request.templates, request.lag, request.gap,
                                     request.epsilon if request.epsilon is not None else AUTO,
                                     opts)
    else:
        raise BadParameters(f"unknown formulation {f!r}")
    if request.threshold is not None:
        est = threshold_unweighted(est, request.threshold)
    return est
