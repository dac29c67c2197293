import numpy as np, time, json
from spectempo import linalg, solver
from spectempo.graphs import generate_er, adjacency
from spectempo.diffusion import exact_templates, spectral_filter, diffuse, sample_covariance, extract_templates

n=20
nvec=n*n
a_scale = np.zeros(nvec); a_scale[0:n] = 1.0
syms = []
for i in range(n):
    for j in range(i+1, n):
        row = np.zeros(nvec); row[j*n+i] = 1.0; row[i*n+j] = -1.0
        syms.append((row, 0.0))
pins = tuple((int(i), 0.0) for i in linalg.diag_indices_vec(n))

def noisy_problem(Vhat, eps):
    W = linalg.khatri_rao(Vhat, Vhat)
    return solver.SparseRecoveryProblem(n_vec=nvec, basis=W, pins=pins, lower=np.zeros(nvec),
        linear_equalities=tuple([(a_scale,1.0)]+syms), ball=solver.Ball(eps))

def fm(S, A, thresh=0.3):
    Sn = np.abs(S.copy()); np.fill_diagonal(Sn, 0)
    m = Sn.max();  Sn = Sn/m if m>0 else Sn
    est = (Sn > thresh); true = (A > 0)
    iu = np.triu_indices_from(A, 1)
    tp = (est[iu]&true[iu]).sum(); fp=(est[iu]&~true[iu]).sum(); fn=(~est[iu]&true[iu]).sum()
    pr= tp/max(tp+fp,1); rc = tp/max(tp+fn,1)
    return 2*pr*rc/max(pr+rc,1e-12), (fp+fn)/max(true[iu].sum(),1)

g = generate_er(n, 0.2, 0); A = adjacency(g).matrix
T = exact_templates(A)
rng = np.random.default_rng(224938)  # screened at c=1.5
resp = rng.uniform(0.5, 1.5, n)
H = spectral_filter(T, resp)
opts = solver.SolverOptions(rel_tol=1e-5, abs_tol=1e-7, max_iter=15000)

out = {}
for P in [100, 1000, 10000, 100000]:
    mids, midsrw = [], []
    t0=time.time()
    for sseed in range(5):
        That = extract_templates(sample_covariance(diffuse(H, P, 1000*sseed+7)))
        p = noisy_problem(That.V, 0.1)
        eps_star = solver.min_feasible_epsilon(p, opts)
        p2 = solver.SparseRecoveryProblem(**{**p.__dict__, 'ball': solver.Ball(eps_star)})
        sol = solver.solve(p2, opts)
        f, mis = fm(linalg.unvec(sol.s, n), A)
        mids.append(float(mis))
        s = sol.s
        for _ in range(2):
            sol = solver.solve(p2, opts, weights_override=1.0/(np.abs(s)+1e-3))
            s = sol.s
        f2, mis2 = fm(linalg.unvec(s, n), A)
        midsrw.append(float(mis2))
    out[P] = {"plain": mids, "rw": midsrw, "secs": time.time()-t0}
    print(f"P={P}: plain={np.mean(mids):.3f} rw2={np.mean(midsrw):.3f} [{out[P]['secs']:.0f}s]", flush=True)
json.dump(out, open(".pilot/pilot_c5.json","w"), indent=1)
