"""Weighted-l1 minimization over an intersection of affine, sign/box,
eigenvalue-ordering, and Euclidean-ball constraints.

One operator-splitting engine backs every inference formulation.  The
variable is ``x = [s; lam; s_extra]`` (or just ``lam`` when the spectral
coupling ``s = W lam`` is an exact equality, in which case ``s`` is
eliminated).  Hard equalities stay in the x-update, which is a projection in
a fixed quadratic metric and is solved through one precomputed
factorization; every remaining constraint and the nonsmooth objective live
in consensus blocks with closed-form proximal maps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import linalg
from .errors import BadParameters, Infeasible, NeverFeasible

WEIGHTED_L1 = "weighted_l1"
FROBENIUS = "frobenius"
INF_NORM = "inf_norm"

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max_iter"
STATUS_INFEASIBLE = "infeasible"

DISTANCE_FROBENIUS = "frobenius"
DISTANCE_SPECTRAL = "spectral"


@dataclass(frozen=True)
class Ball:
    """Couples ``s`` to the template expansion through ``d(s, s') <= radius``
    where ``s' = W lam (+ s_extra)``.  ``soft_linear`` rows ``(a, b)`` are
    appended to the residual, turning the ball into the augmented distance
    ``sqrt(||s - s'||^2 + sum (a^T s - b)^2) <= radius``."""

    radius: float
    distance: str = DISTANCE_FROBENIUS
    soft_linear: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class ExtraBlock:
    """Second matrix variable (same vec dimension as ``s``) entering the
    spectral coupling additively, constrained by ``equalities @ s_extra = rhs``."""

    equalities: np.ndarray
    rhs: np.ndarray


@dataclass(frozen=True)
class SparseRecoveryProblem:
    """Declarative description of one recovery program.

    ``basis`` is the (vectorized) template expansion matrix ``W`` such that
    the spectral-consistency target is ``W lam``.  Without a ``ball`` the
    coupling ``s = W lam (+ s_extra)`` is enforced exactly.
    """

    n_vec: int
    basis: np.ndarray
    weights: np.ndarray | None = None
    pins: tuple = field(default_factory=tuple)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    linear_equalities: tuple = field(default_factory=tuple)
    lambda_pins: tuple = field(default_factory=tuple)
    lambda_lower: np.ndarray | None = None
    lambda_gaps: tuple = field(default_factory=tuple)
    ball: Ball | None = None
    extra: ExtraBlock | None = None

    def __post_init__(self):
        W = linalg.as_matrix(self.basis, "basis")
        if W.shape[0] != self.n_vec:
            raise BadParameters("basis row count must equal n_vec")
        object.__setattr__(self, "basis", W)
        w = self.weights
        if w is not None:
            w = np.asarray(w, dtype=float)
            if w.shape != (self.n_vec,) or np.any(w < 0):
                raise BadParameters("weights must be a nonnegative length-n_vec vector")
            object.__setattr__(self, "weights", w)
        if self.ball is not None and self.ball.radius < 0:
            raise BadParameters("ball radius must be nonnegative")

    @property
    def n_lambda(self) -> int:
        return self.basis.shape[1]

    def effective_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(self.n_vec)
        return self.weights

    def bounds(self):
        lo = np.full(self.n_vec, -np.inf) if self.lower is None else np.asarray(self.lower, float)
        hi = np.full(self.n_vec, np.inf) if self.upper is None else np.asarray(self.upper, float)
        return lo, hi


@dataclass(frozen=True)
class SolverOptions:
    rho: float = 1.0
    adapt_rho: bool = True
    abs_tol: float = 1e-8
    rel_tol: float = 1e-6
    max_iter: int = 50000
    objective: str = WEIGHTED_L1
    polish: bool = True
    support_tol: float = 1e-6
    plateau_iters: int = 1000
    feas_tol: float = 1e-6

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise BadParameters("tolerances must be positive")
        if self.objective not in (WEIGHTED_L1, FROBENIUS, INF_NORM):
            raise BadParameters(f"unknown objective {self.objective!r}")


@dataclass(frozen=True)
class Solution:
    s: np.ndarray
    lam: np.ndarray
    s_extra: np.ndarray | None
    status: str
    objective_value: float
    primal_residual: float
    dual_residual: float
    iterations: int


def objective_value(problem: SparseRecoveryProblem, s: np.ndarray, objective: str) -> float:
    if objective == WEIGHTED_L1:
        return float(problem.effective_weights() @ np.abs(s))
    if objective == FROBENIUS:
        return float(np.linalg.norm(s))
    return float(np.abs(s).max(initial=0.0))


# ---------------------------------------------------------------------------
# proximal maps

def _project_l1_ball(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - radius
    ks = np.arange(1, a.size + 1)
    k = np.max(np.flatnonzero(u - css / ks > 0))
    theta = css[k] / (k + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def _prox_weighted_l1_box(v, w, lo, hi):
    z = np.sign(v) * np.maximum(np.abs(v) - w, 0.0)
    return np.clip(z, lo, hi)


def _prox_frobenius(v, t):
    nrm = np.linalg.norm(v)
    if nrm <= t:
        return np.zeros_like(v)
    return (1.0 - t / nrm) * v


def _prox_inf_norm(v, t):
    if t <= 0:
        return v.copy()
    return v - t * _project_l1_ball(v / t)


class _Block:
    """One consensus copy ``z = F x + c`` with an exact prox for its term.

    ``apply``/``apply_t`` may exploit structure (selector rows, coupling
    stencils); ``F`` is the dense matrix used once to assemble the metric.
    """

    def __init__(self, F, c, prox, name, is_constraint=True,
                 apply=None, apply_t=None):
        self.F = np.asarray(F, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.prox = prox  # (v, rho) -> z
        self.name = name
        self.is_constraint = is_constraint
        self.apply = apply if apply is not None else (lambda x: self.F @ x)
        self.apply_t = apply_t if apply_t is not None else (lambda v: self.F.T @ v)


class _Compiled:
    """Problem compiled to the splitting form with cached factorizations."""

    def __init__(self, problem: SparseRecoveryProblem, objective: str,
                 weights_override=None, feasibility=False, distance_objective=False):
        self.problem = problem
        self.objective = objective
        self.feasibility = feasibility
        self.distance_objective = distance_objective
        if distance_objective:
            feasibility = True
            self.feasibility = True
        p = problem
        n, K = p.n_vec, p.n_lambda
        self.eliminated = p.ball is None and p.extra is None

        if self.eliminated:
            dim = K
            S_map = p.basis
            lam_slice = slice(0, K)
            extra_slice = None
        else:
            dim = n + K + (n if p.extra is not None else 0)
            S_map = np.zeros((n, dim))
            S_map[:, :n] = np.eye(n)
            lam_slice = slice(n, n + K)
            extra_slice = slice(n + K, n + K + n) if p.extra is not None else None
        self.dim = dim
        self.S_map = S_map
        self.lam_slice = lam_slice
        self.extra_slice = extra_slice

        # --- hard equality rows -------------------------------------------
        rows, rhs = [], []
        if not self.eliminated and p.ball is None:
            # exact spectral coupling s - W lam - s_extra = 0
            C = np.zeros((n, dim))
            C[:, :n] = np.eye(n)
            C[:, lam_slice] = -p.basis
            if extra_slice is not None:
                C[:, extra_slice] = -np.eye(n)
            rows.append(C)
            rhs.append(np.zeros(n))
        for (idx, val) in p.pins:
            rows.append(S_map[int(idx)][None, :])
            rhs.append([float(val)])
        for (a, b) in p.linear_equalities:
            rows.append((np.asarray(a, float) @ S_map)[None, :])
            rhs.append([float(b)])
        for (k, val) in p.lambda_pins:
            r = np.zeros((1, dim))
            r[0, lam_slice.start + int(k) if not self.eliminated else int(k)] = 1.0
            rows.append(r)
            rhs.append([float(val)])
        if p.extra is not None:
            E = linalg.as_matrix(p.extra.equalities, "extra equalities")
            Crow = np.zeros((E.shape[0], dim))
            Crow[:, extra_slice] = E
            rows.append(Crow)
            rhs.append(np.asarray(p.extra.rhs, float))
        self.A = np.vstack(rows) if rows else np.zeros((0, dim))
        self.b = np.concatenate([np.atleast_1d(np.asarray(r, float)) for r in rhs]) if rhs else np.zeros(0)

        # --- consensus blocks ---------------------------------------------
        self.blocks: list[_Block] = []
        lo, hi = p.bounds()
        w_obj = p.effective_weights() if weights_override is None else np.asarray(weights_override, float)
        has_box = np.any(np.isfinite(lo)) or np.any(np.isfinite(hi))

        if self.eliminated:
            s_apply = lambda x: p.basis @ x
            s_apply_t = lambda v: p.basis.T @ v
        else:
            def s_apply(x):
                return x[:n].copy()

            def s_apply_t(v):
                out = np.zeros(dim)
                out[:n] = v
                return out

        def selector_block(prox, name, is_constraint=True):
            return _Block(S_map, np.zeros(n), prox, name, is_constraint,
                          apply=s_apply, apply_t=s_apply_t)

        if feasibility:
            if has_box:
                self.blocks.append(selector_block(
                    lambda v, rho: np.clip(v, lo, hi), "signs"))
            # inertia block keeps the x-update well posed
            self.blocks.append(_Block(np.eye(dim), np.zeros(dim),
                                      lambda v, rho: v, "free", is_constraint=False,
                                      apply=lambda x: x.copy(), apply_t=lambda v: v))
        elif objective == WEIGHTED_L1:
            self.blocks.append(selector_block(
                lambda v, rho: _prox_weighted_l1_box(v, w_obj / rho, lo, hi),
                "objective", is_constraint=has_box))
        else:
            if objective == FROBENIUS:
                self.blocks.append(selector_block(
                    lambda v, rho: _prox_frobenius(v, 1.0 / rho),
                    "objective", is_constraint=False))
            else:
                self.blocks.append(selector_block(
                    lambda v, rho: _prox_inf_norm(v, 1.0 / rho),
                    "objective", is_constraint=False))
            if has_box:
                self.blocks.append(selector_block(
                    lambda v, rho: np.clip(v, lo, hi), "signs"))

        if p.lambda_lower is not None:
            llo = np.asarray(p.lambda_lower, float)
            F = np.zeros((K, dim))
            F[:, lam_slice] = np.eye(K)
            lam_s = lam_slice

            def lam_apply(x, sl=lam_s):
                return x[sl].copy()

            def lam_apply_t(v, sl=lam_s, d=dim):
                out = np.zeros(d)
                out[sl] = v
                return out

            self.blocks.append(_Block(F, np.zeros(K),
                                      lambda v, rho: np.maximum(v, llo), "lambda bounds",
                                      apply=lam_apply, apply_t=lam_apply_t))
        if p.lambda_gaps:
            D = np.zeros((len(p.lambda_gaps), dim))
            gaps = np.zeros(len(p.lambda_gaps))
            base = 0 if self.eliminated else lam_slice.start
            for r, (i, j, g) in enumerate(p.lambda_gaps):
                D[r, base + int(i)] = 1.0
                D[r, base + int(j)] = -1.0
                gaps[r] = float(g)
            self.blocks.append(_Block(D, np.zeros(len(p.lambda_gaps)),
                                      lambda v, rho: np.maximum(v, gaps), "ordering"))

        self.ball_index = None
        if p.ball is not None:
            Fb = np.zeros((n, dim))
            Fb[:, :n] = np.eye(n)
            Fb[:, lam_slice] = -p.basis
            if extra_slice is not None:
                Fb[:, extra_slice] = -np.eye(n)
            cb = np.zeros(n)
            soft_A = None
            if p.ball.soft_linear:
                if p.ball.distance == DISTANCE_SPECTRAL:
                    raise BadParameters("spectral distance does not support soft rows")
                soft_A = np.vstack([np.asarray(a, float)[None, :] for (a, _) in p.ball.soft_linear])
                extra_rows = soft_A @ S_map
                extra_c = np.array([-float(b) for (_, b) in p.ball.soft_linear])
                Fb = np.vstack([Fb, extra_rows])
                cb = np.concatenate([cb, extra_c])

            W = p.basis
            has_extra = extra_slice is not None
            ls, es = lam_slice, extra_slice

            def ball_apply(x):
                r = x[:n] - W @ x[ls]
                if has_extra:
                    r = r - x[es]
                if soft_A is None:
                    return r
                return np.concatenate([r, soft_A @ x[:n]])

            def ball_apply_t(v):
                out = np.zeros(dim)
                head = v[:n]
                out[:n] = head
                out[ls] = -(W.T @ head)
                if has_extra:
                    out[es] = -head
                if soft_A is not None:
                    out[:n] += soft_A.T @ v[n:]
                return out

            self.ball_index = len(self.blocks)
            self.blocks.append(_Block(Fb, cb, None, "ball",
                                      apply=ball_apply, apply_t=ball_apply_t))
        self._nside = int(round(np.sqrt(n)))

        # --- factorizations (rho-independent) ------------------------------
        M = np.zeros((dim, dim))
        for blk in self.blocks:
            M += blk.F.T @ blk.F
        try:
            if np.min(np.diag(M)) <= 1e-12:
                raise np.linalg.LinAlgError
            ch = scipy.linalg.cho_factor(M)
            pivot2 = float(np.min(np.diag(ch[0])) ** 2)
            if not np.isfinite(pivot2) or pivot2 <= 1e-10 * float(np.max(np.diag(M))):
                raise np.linalg.LinAlgError  # semidefinite within roundoff
            self.M_chol = ch
        except np.linalg.LinAlgError:
            self.blocks.append(_Block(np.eye(dim), np.zeros(dim),
                                      lambda v, rho: v, "free", is_constraint=False,
                                      apply=lambda x: x.copy(), apply_t=lambda v: v))
            M = M + np.eye(dim)
            self.M_chol = scipy.linalg.cho_factor(M)

        if self.A.shape[0]:
            Minv_At = scipy.linalg.cho_solve(self.M_chol, self.A.T)
            G = self.A @ Minv_At
            gw, gv = np.linalg.eigh(0.5 * (G + G.T))
            cut = max(gw.max(initial=0.0), 0.0) * 1e-12
            inv = np.where(gw > cut, 1.0 / np.where(gw > cut, gw, 1.0), 0.0)
            self._G_pinv = (gv * inv) @ gv.T
            self._Minv_At = Minv_At
            proj_b = G @ (self._G_pinv @ self.b)
            self.equalities_consistent = bool(
                np.abs(proj_b - self.b).max(initial=0.0) <= 1e-8 * (1.0 + np.abs(self.b).max(initial=0.0))
            )
        else:
            self._G_pinv = None
            self._Minv_At = None
            self.equalities_consistent = True

    # -- x-update: argmin sum ||F_i x + c_i - t_i||^2  s.t.  A x = b --------
    def _x_update(self, targets):
        r = np.zeros(self.dim)
        for blk, t in zip(self.blocks, targets):
            r += blk.apply_t(t - blk.c)
        x_free = scipy.linalg.cho_solve(self.M_chol, r)
        if self.A.shape[0] == 0:
            return x_free
        nu = self._G_pinv @ (self.b - self.A @ x_free)
        return x_free + self._Minv_At @ nu

    def _ball_prox(self, v, eps):
        ball = self.problem.ball
        if ball.distance == DISTANCE_SPECTRAL:
            n = self._nside
            Rm = linalg.unvec(v, n)
            U, sv, Vt = np.linalg.svd(0.5 * (Rm + Rm.T))
            Rm_proj = (U * np.minimum(sv, eps)) @ Vt
            return linalg.vec(Rm_proj)
        nrm = np.linalg.norm(v)
        if nrm <= eps:
            return v.copy()
        return v * (eps / max(nrm, 1e-300))

    def run(self, options: SolverOptions, epsilon=None, warm=None):
        if not self.equalities_consistent:
            return {"status": STATUS_INFEASIBLE, "x": np.zeros(self.dim),
                    "z": None, "u": None, "iterations": 0,
                    "primal": np.inf, "dual": np.inf, "violation": np.inf}
        p = self.problem
        eps = epsilon if epsilon is not None else (p.ball.radius if p.ball else None)
        rho = options.rho
        if warm is None:
            z = [blk.c.copy() * 0.0 for blk in self.blocks]
            u = [np.zeros(blk.F.shape[0]) for blk in self.blocks]
        else:
            z = [zi.copy() for zi in warm[0]]
            u = [ui.copy() for ui in warm[1]]

        m_total = sum(blk.F.shape[0] for blk in self.blocks)
        sqrt_m = np.sqrt(max(m_total, 1))
        sqrt_d = np.sqrt(self.dim)
        best_violation = np.inf
        plateau_anchor = np.inf
        plateau_count = 0
        status = STATUS_MAX_ITER
        it = 0
        primal = dual = np.inf

        for it in range(1, options.max_iter + 1):
            x = self._x_update([zi - ui for zi, ui in zip(z, u)])
            vs = [blk.apply(x) + blk.c for blk in self.blocks]
            z_old = z
            z = []
            for bi, (blk, v) in enumerate(zip(self.blocks, vs)):
                w = v + u[bi]
                if bi == self.ball_index:
                    if self.distance_objective:
                        z.append(_prox_frobenius(w, 1.0 / rho))
                    else:
                        z.append(self._ball_prox(w, eps))
                else:
                    z.append(blk.prox(w, rho))
            for bi in range(len(u)):
                u[bi] = u[bi] + vs[bi] - z[bi]

            primal = np.sqrt(sum(float(np.sum((vi - zi) ** 2)) for vi, zi in zip(vs, z)))
            dvec = np.zeros(self.dim)
            uvec = np.zeros(self.dim)
            vnorm2 = znorm2 = 0.0
            for blk, zi, zo, vi, ui in zip(self.blocks, z, z_old, vs, u):
                dvec += blk.apply_t(zi - zo)
                uvec += blk.apply_t(ui)
                vnorm2 += float(np.sum(vi**2))
                znorm2 += float(np.sum(zi**2))
            unorm2 = float(np.sum(uvec**2))
            dual = rho * float(np.linalg.norm(dvec))
            eps_pri = sqrt_m * options.abs_tol + options.rel_tol * max(np.sqrt(vnorm2), np.sqrt(znorm2))
            eps_dual = sqrt_d * options.abs_tol + options.rel_tol * rho * np.sqrt(unorm2)

            pure_feasibility = self.feasibility and not self.distance_objective
            if primal <= eps_pri and dual <= eps_dual:
                if not pure_feasibility:
                    status = STATUS_OPTIMAL
                    break
                violation = self._constraint_violation(vs, x, eps)
                best_violation = min(best_violation, violation)
                if violation <= 0.5 * options.feas_tol:
                    status = STATUS_OPTIMAL
                    break

            # constraint-violation plateau => infeasible (ball too small etc.)
            if it % 25 == 0:
                violation = self._constraint_violation(vs, x, eps)
                best_violation = min(best_violation, violation)
                if pure_feasibility and violation <= 0.5 * options.feas_tol:
                    status = STATUS_OPTIMAL
                    break
            if it % options.plateau_iters == 0:
                if (best_violation > options.feas_tol
                        and best_violation > 0.999 * plateau_anchor
                        and np.isfinite(plateau_anchor)):
                    plateau_count += 1
                    if plateau_count >= 2:
                        status = STATUS_INFEASIBLE
                        break
                else:
                    plateau_count = 0
                plateau_anchor = best_violation

            if options.adapt_rho and it % 50 == 0:
                if primal > 10.0 * dual and rho < 1e6:
                    rho *= 2.0
                    u = [ui / 2.0 for ui in u]
                elif dual > 10.0 * primal and rho > 1e-6:
                    rho /= 2.0
                    u = [ui * 2.0 for ui in u]

        x = self._x_update([zi - ui for zi, ui in zip(z, u)])
        vs = [blk.apply(x) + blk.c for blk in self.blocks]
        violation = self._constraint_violation(vs, x, eps)
        if status == STATUS_OPTIMAL and violation > options.feas_tol:
            status = STATUS_MAX_ITER
        return {"status": status, "x": x, "z": z, "u": u, "iterations": it,
                "primal": primal, "dual": dual, "violation": violation,
                "epsilon": eps}

    def _constraint_violation(self, vs, x, eps=None):
        """Max violation of the non-objective constraints at the current x."""
        p = self.problem
        worst = 0.0
        for bi, (blk, v) in enumerate(zip(self.blocks, vs)):
            if bi == self.ball_index:
                if self.distance_objective:
                    continue
                radius = eps if eps is not None else p.ball.radius
                worst = max(worst, self.ball_residual(x) - radius)
                continue
            if not blk.is_constraint:
                continue
            if blk.name == "objective":
                lo, hi = p.bounds()
                s = self.S_map @ x
                proj = np.clip(s, lo, hi)
                worst = max(worst, float(np.abs(s - proj).max(initial=0.0)))
                continue
            proj = blk.prox(v, 1.0)
            worst = max(worst, float(np.abs(v - proj).max(initial=0.0)))
        return worst

    def ball_residual(self, x, epsilon=None):
        if self.ball_index is None:
            return 0.0
        blk = self.blocks[self.ball_index]
        v = blk.apply(x) + blk.c
        if self.problem.ball.distance == DISTANCE_SPECTRAL:
            n = self._nside
            return float(np.linalg.svd(linalg.unvec(v, n), compute_uv=False)[0])
        return float(np.linalg.norm(v))

    # -- support polishing (pure-equality instances) -------------------------
    def polish(self, x, options: SolverOptions, weights):
        if self.problem.ball is not None:
            return None
        s = self.S_map @ x
        scale = max(np.abs(s).max(initial=0.0), 1.0)
        off = np.flatnonzero(np.abs(s) <= options.support_tol * scale)
        E = np.vstack([self.A, self.S_map[off]]) if off.size else self.A
        rhs = np.concatenate([self.b, np.zeros(off.size)])
        if E.shape[0] == 0:
            return None
        xp, *_ = np.linalg.lstsq(E, rhs, rcond=None)
        if np.abs(E @ xp - rhs).max(initial=0.0) > 1e-9 * (1.0 + np.abs(rhs).max(initial=0.0)):
            return None
        sp = self.S_map @ xp
        sp[off] = 0.0
        lo, hi = self.problem.bounds()
        if np.any(sp < lo - 1e-9) or np.any(sp > hi + 1e-9):
            return None
        if self.problem.lambda_lower is not None or self.problem.lambda_gaps:
            lam = xp[self.lam_slice] if not self.eliminated else xp
            if self.problem.lambda_lower is not None and np.any(
                    lam < np.asarray(self.problem.lambda_lower, float) - 1e-9):
                return None
            for (i, j, g) in self.problem.lambda_gaps:
                if lam[int(i)] - lam[int(j)] < g - 1e-9:
                    return None
        if float(weights @ np.abs(sp)) > float(weights @ np.abs(s)) + 1e-7 * (1.0 + scale):
            return None
        return xp


def _assemble(compiled: _Compiled, raw, options: SolverOptions,
              problem: SparseRecoveryProblem, weights=None) -> Solution:
    x = raw["x"]
    s = compiled.S_map @ x
    lam = x[compiled.lam_slice] if not compiled.eliminated else x.copy()
    s_extra = x[compiled.extra_slice].copy() if compiled.extra_slice is not None else None
    if options.objective == WEIGHTED_L1 and weights is not None:
        obj = float(np.asarray(weights, float) @ np.abs(s))
    else:
        obj = objective_value(problem, s, options.objective)
    return Solution(
        s=s,
        lam=lam,
        s_extra=s_extra,
        status=raw["status"],
        objective_value=obj,
        primal_residual=float(raw["primal"]),
        dual_residual=float(raw["dual"]),
        iterations=int(raw["iterations"]),
    )


def solve(problem: SparseRecoveryProblem, options: SolverOptions | None = None,
          weights_override=None) -> Solution:
    """Minimize the configured objective over the problem's feasible set."""
    options = options or SolverOptions()
    compiled = _Compiled(problem, options.objective, weights_override=weights_override)
    raw = compiled.run(options)
    if raw["status"] == STATUS_INFEASIBLE and not compiled.equalities_consistent:
        raise Infeasible("equality constraints are inconsistent")
    if options.polish and options.objective == WEIGHTED_L1 and raw["status"] != STATUS_INFEASIBLE:
        w = problem.effective_weights() if weights_override is None else np.asarray(weights_override, float)
        xp = compiled.polish(raw["x"], options, w)
        if xp is not None:
            raw = dict(raw)
            raw["x"] = xp
            raw["status"] = STATUS_OPTIMAL
            raw["primal"] = 0.0
            raw["dual"] = 0.0
    return _assemble(compiled, raw, options, problem, weights=weights_override)


def probe_feasible(problem: SparseRecoveryProblem, options: SolverOptions | None = None,
                   epsilon=None) -> bool:
    """True iff a point satisfying every constraint (ball included) exists,
    judged by driving the constraint violation below ``feas_tol``."""
    if problem.ball is None:
        raise BadParameters("probe_feasible requires a ball constraint")
    options = options or SolverOptions()
    compiled = _Compiled(problem, options.objective, feasibility=True)
    raw = compiled.run(options, epsilon=epsilon)
    if raw["status"] == STATUS_INFEASIBLE:
        return False
    eps = epsilon if epsilon is not None else problem.ball.radius
    ball_ok = compiled.ball_residual(raw["x"]) <= eps + options.feas_tol
    return bool(raw["violation"] <= options.feas_tol and ball_ok)


def _heuristic_distance(problem: SparseRecoveryProblem, options: SolverOptions) -> float:
    """Coupling distance of a constraint-feasible point found with the ball
    switched off (radius made huge)."""
    compiled = _Compiled(problem, options.objective, feasibility=True)
    raw = compiled.run(options, epsilon=1e12)
    return compiled.ball_residual(raw["x"])


def min_coupling_distance(problem: SparseRecoveryProblem,
                          options: SolverOptions | None = None):
    """Minimize the coupling distance itself over the remaining constraints.

    Returns ``(distance, status)``; the distance is the infimum of feasible
    ball radii when the solve converges.
    """
    if problem.ball is None:
        raise BadParameters("min_coupling_distance requires a ball constraint")
    options = options or SolverOptions()
    compiled = _Compiled(problem, options.objective, distance_objective=True)
    raw = compiled.run(options)
    return compiled.ball_residual(raw["x"]), raw["status"]


def min_feasible_epsilon(problem: SparseRecoveryProblem,
                         options: SolverOptions | None = None,
                         bracket: tuple | None = None,
                         rel_width: float = 1e-3) -> float:
    """Smallest ball radius admitting a feasible point.

    A direct minimum-distance solve pins the answer in one run; bisection
    with feasibility probes refines or replaces it when that solve does not
    converge cleanly.  The returned radius is always probe-verified feasible.
    """
    if problem.ball is None:
        raise BadParameters("min_feasible_epsilon requires a ball constraint")
    options = options or SolverOptions()
    probe_opts = SolverOptions(
        rho=options.rho, adapt_rho=options.adapt_rho,
        abs_tol=options.abs_tol, rel_tol=options.rel_tol,
        max_iter=min(options.max_iter, 20000), objective=options.objective,
        polish=False, support_tol=options.support_tol,
        plateau_iters=min(options.plateau_iters, 500), feas_tol=options.feas_tol)
    compiled = _Compiled(problem, options.objective, feasibility=True)

    def probe(eps, warm=None):
        raw = compiled.run(probe_opts, epsilon=eps, warm=warm)
        ok = (raw["status"] != STATUS_INFEASIBLE
              and raw["violation"] <= probe_opts.feas_tol
              and compiled.ball_residual(raw["x"]) <= eps + probe_opts.feas_tol)
        return ok, (raw["z"], raw["u"])

    warm = None
    if bracket is None:
        dist, _ = min_coupling_distance(problem, probe_opts)
        if dist <= 10.0 * probe_opts.feas_tol:
            ok0, warm = probe(0.0)
            if ok0:
                return 0.0
        eps = max(dist, 1e-12) * (1.0 + rel_width)
        ok, warm = probe(eps, warm)
        if ok:
            return eps
        # the distance solve undershot; expand from it
        lo, hi = eps, max(1.05 * eps, 1e-9)
    else:
        lo, hi = float(bracket[0]), float(bracket[1])
        ok0, warm = probe(lo) if lo == 0.0 else (False, None)
        if ok0:
            return 0.0

    ok_hi, warm = probe(hi, warm)
    expansions = 0
    while not ok_hi:
        hi *= 2.0
        expansions += 1
        if expansions > 60:
            raise NeverFeasible("no feasible radius found in the search bracket")
        ok_hi, warm = probe(hi, warm)
    while hi - lo > rel_width * hi:
        mid = 0.5 * (lo + hi)
        ok_mid, warm = probe(mid, warm)
        if ok_mid:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# serialization (debugging / replay)

def problem_to_json(p: SparseRecoveryProblem) -> str:
    d = {
        "n_vec": p.n_vec,
        "basis": linalg.matrix_to_json_dict(p.basis),
        "weights": None if p.weights is None else p.weights.tolist(),
        "pins": [[int(i), float(v)] for (i, v) in p.pins],
        "lower": None if p.lower is None else list(map(float, p.lower)),
        "upper": None if p.upper is None else list(map(float, p.upper)),
        "linear_equalities": [[list(map(float, a)), float(b)] for (a, b) in p.linear_equalities],
        "lambda_pins": [[int(k), float(v)] for (k, v) in p.lambda_pins],
        "lambda_lower": None if p.lambda_lower is None else list(map(float, p.lambda_lower)),
        "lambda_gaps": [[int(i), int(j), float(g)] for (i, j, g) in p.lambda_gaps],
        "ball": None if p.ball is None else {
            "radius": p.ball.radius,
            "distance": p.ball.distance,
            "soft_linear": [[list(map(float, a)), float(b)] for (a, b) in p.ball.soft_linear],
        },
        "extra": None if p.extra is None else {
            "equalities": linalg.matrix_to_json_dict(p.extra.equalities),
            "rhs": list(map(float, p.extra.rhs)),
        },
    }
    return json.dumps(d)


def problem_from_json(text: str) -> SparseRecoveryProblem:
    d = json.loads(text)
    ball = None
    if d["ball"] is not None:
        ball = Ball(d["ball"]["radius"], d["ball"]["distance"],
                    tuple((np.array(a), b) for a, b in d["ball"]["soft_linear"]))
    extra = None
    if d["extra"] is not None:
        extra = ExtraBlock(linalg.matrix_from_json_dict(d["extra"]["equalities"]),
                           np.array(d["extra"]["rhs"]))
    return SparseRecoveryProblem(
        n_vec=int(d["n_vec"]),
        basis=linalg.matrix_from_json_dict(d["basis"]),
        weights=None if d["weights"] is None else np.array(d["weights"]),
        pins=tuple((i, v) for i, v in d["pins"]),
        lower=None if d["lower"] is None else np.array(d["lower"]),
        upper=None if d["upper"] is None else np.array(d["upper"]),
        linear_equalities=tuple((np.array(a), b) for a, b in d["linear_equalities"]),
        lambda_pins=tuple((k, v) for k, v in d["lambda_pins"]),
        lambda_lower=None if d["lambda_lower"] is None else np.array(d["lambda_lower"]),
        lambda_gaps=tuple((i, j, g) for i, j, g in d["lambda_gaps"]),
        ball=ball,
        extra=extra,
    )


def solution_to_json(sol: Solution) -> str:
    return json.dumps({
        "s": sol.s.tolist(),
        "lam": sol.lam.tolist(),
        "s_extra": None if sol.s_extra is None else sol.s_extra.tolist(),
        "status": sol.status,
        "objective_value": sol.objective_value,
        "primal_residual": sol.primal_residual,
        "dual_residual": sol.dual_residual,
        "iterations": sol.iterations,
    })
