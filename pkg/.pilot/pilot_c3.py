import numpy as np, time
from spectempo import certificates, inference, experiments
from spectempo.graphs import ShiftConstraintSet, ADJACENCY
cset = ShiftConstraintSet(ADJACENCY)
kept = viol = n_below = 0
t0 = time.time()
seed = 0
while kept < 200 and seed < 400000:
    res = experiments.qualifying_psi_instance(20, 0.25, 17 + 7919 * seed)
    seed += 1
    if res is None: continue
    kept += 1
    g, actual, A, T, cert = res
    if cert.value < 1.0:
        n_below += 1
        est = inference.infer_noiseless(T, cset)
        if np.abs(est.S - experiments.scaled_truth(A)).max() >= 1e-5:
            viol += 1
            print("violation at", actual, cert.value, cert.minimizing_delta, flush=True)
    if kept % 50 == 0:
        print(f"... {kept} kept, {n_below} below 1, {viol} violations [{time.time()-t0:.0f}s]", flush=True)
print(f"FINAL {kept} qualifying, {n_below} psi<1, {viol} violations [{time.time()-t0:.0f}s]", flush=True)
