import numpy as np, time, json
from spectempo import experiments

cfg = experiments.ExperimentConfig(
    experiment="table1-comparison", constraint_set="combinatorial_laplacian",
    n=20, p=0.3, P=1000, sigma=0.1, lag=3, gap=0.1, threshold=0.3,
    train_graphs=3, test_graphs=6)
t0 = time.time()
rows, summary = experiments.table1_smooth(cfg, alpha_grid=(1.0, 1.5, 2.0, 3.0))
print(json.dumps(summary, indent=1))
print("alpha:", rows[0]["alpha"] if rows else None)
print("fs:", [round(r["f_measure"], 3) for r in rows])
print(f"secs: {time.time()-t0:.0f}")
json.dump({"rows": rows, "secs": time.time()-t0}, open(".pilot/pilot_c9.json", "w"), indent=1)
