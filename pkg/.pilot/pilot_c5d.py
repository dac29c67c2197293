import numpy as np, time
from spectempo import experiments, inference, linalg
from spectempo.graphs import ShiftConstraintSet, ADJACENCY, adjacency
from spectempo.diffusion import (exact_templates, spectral_filter, diffuse,
                                 sample_covariance, extract_templates, SignalEnsemble)

cfg = experiments.ExperimentConfig(n=20, p=0.2, graph_seed=0,
                                   P_list=(100, 1000, 10000, 100000),
                                   seeds=tuple(range(10)))
g, _ = experiments.er_with_active_scale_node(20, 0.2, 0)
A = adjacency(g).matrix
T = exact_templates(adjacency(g))
rng = np.random.default_rng(experiments.screened_response_seed(20, 1e5))
H = spectral_filter(T, rng.uniform(0.5, 1.5, 20))
t0 = time.time()
for P in cfg.P_list:
    vals = []
    for s in range(10):
        X_full = diffuse(H, 100000, 1000*s+7)
        That = extract_templates(sample_covariance(SignalEnsemble(X_full.samples[:P])))
        est = inference.infer_noisy(That, ShiftConstraintSet(ADJACENCY),
                                    epsilon=inference.AUTO, options=experiments.NOISY_OPTS,
                                    reweight_iters=2)
        sc = experiments.unweighted_support_scores(est, A, 0.3)
        vals.append(sc.misidentified_fraction)
    print(f"P={P}: rw2 mean misid={np.mean(vals):.4f} vals={[round(v,3) for v in vals]} [{time.time()-t0:.0f}s]", flush=True)
