import numpy as np, time
from spectempo import experiments
cfg = experiments.ExperimentConfig(
    experiment="noisy-sweep", n=20, p=0.2, graph_seed=0,
    P_list=(100, 1000, 10000, 100000), seeds=tuple(range(10)))
t0 = time.time()
rows, summary = experiments.noisy_sweep(cfg)
for s in sorted(summary, key=lambda s: s["P"]):
    print(f"P={s['P']}: mean misid={s['mean_misidentified']:.4f}", flush=True)
print(f"total {time.time()-t0:.0f}s", flush=True)
