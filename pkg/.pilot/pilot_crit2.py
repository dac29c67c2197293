import numpy as np, time, json
from spectempo import linalg, solver, inference, certificates, experiments
from spectempo.graphs import ShiftConstraintSet, ADJACENCY, adjacency
from spectempo.diffusion import exact_templates

out = {}

# --- criterion 4 timing: worst cell N=20 p=0.5 reweighted x20 seeds
t0 = time.time()
csetA = ShiftConstraintSet(ADJACENCY)
nrec = 0
nsing = 0
for i in range(20):
    g, actual = experiments.er_with_active_scale_node(20, 0.5, 1000*i + 500 + 131*20)
    A = adjacency(g).matrix
    T = exact_templates(adjacency(g))
    fr = certificates.feasibility_rank(T, csetA)
    nsing += fr["singleton"]
    est = inference.infer_reweighted(T, csetA)
    nrec += experiments.recovered_exactly(est.S, A)
out["c4_cell"] = {"singleton": nsing, "recovered": nrec, "secs": time.time()-t0}
print("c4 cell (20, 0.5):", out["c4_cell"], flush=True)

# --- criterion 8 timing: n=16 incomplete at K=10 and K=16
t0 = time.time()
g, _ = experiments.er_with_active_scale_node(16, 0.3, 0, require_connected=True)
A = adjacency(g).matrix
T = exact_templates(adjacency(g))
for K in (10, 13, 16):
    rng = np.random.default_rng(3000)
    cols = np.sort(rng.permutation(16)[:K])
    t1 = time.time()
    est = inference.infer_incomplete(T.subset(cols), csetA)
    sc = experiments.unweighted_support_scores(est, A)
    print(f"c8 K={K}: misid={sc.misidentified_fraction:.3f} [{time.time()-t1:.1f}s]", flush=True)
out["c8_secs"] = time.time()-t0

# --- criterion 7: prop3 bound on 5 instances
t0 = time.time()
nok = 0
checked = 0
for i in range(5):
    g, actual = experiments.er_with_active_scale_node(10, 0.3, 100 + i)
    A = adjacency(g).matrix
    s0mat = experiments.scaled_truth(A)
    s0 = linalg.vec(s0mat)
    T = exact_templates(adjacency(g))
    rng = np.random.default_rng(42 + i)
    Vn = T.V + 1e-3 * rng.standard_normal(T.V.shape)
    Q, _ = np.linalg.qr(Vn)
    from spectempo.diffusion import SpectralTemplates, normalize_signs
    That = SpectralTemplates(normalize_signs(Q), T.eigenvalue_estimates.copy(),
                             tuple((k,) for k in range(10)), "file")
    # delta minimizing psi over grid
    cert = certificates.certify_noiseless(That, s0mat, ShiftConstraintSet(ADJACENCY))
    if not (cert.rank_condition_holds and cert.value < 1):
        continue
    rc = certificates.robust_constants(That, s0mat, ShiftConstraintSet(ADJACENCY), cert.minimizing_delta)
    # augmented distance of truth
    W = linalg.khatri_rao(That.V, That.V)
    resid = s0 - W @ (linalg.pseudo_inverse(W) @ s0)
    eps0 = np.sqrt(np.linalg.norm(resid)**2 + 0.0)
    eps = eps0 * 1.001 + 1e-12
    est = inference.infer_noisy(That, ShiftConstraintSet(ADJACENCY), epsilon=eps,
                                relax_signs=True, scale_in_ball=True)
    lhs = np.abs(linalg.vec(est.S) - s0).sum()
    checked += 1
    ok = lhs <= rc.C * eps + 1e-6
    nok += ok
    print(f"c7 inst {i}: C={rc.C:.1f} eps={eps:.4f} lhs={lhs:.4f} bound={rc.C*eps:.4f} ok={ok}", flush=True)
out["c7"] = {"checked": checked, "ok": nok, "secs": time.time()-t0}
json.dump(out, open(".pilot/pilot_crit2.json", "w"), indent=1)
print("done", flush=True)
