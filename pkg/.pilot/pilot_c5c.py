import numpy as np, time, json
from spectempo import experiments
from dataclasses import asdict

cfg = experiments.ExperimentConfig(
    experiment="noisy-sweep", n=20, p=0.2, graph_seed=0,
    P_list=(100, 1000, 10000, 100000), seeds=tuple(range(10)))
cfg_dict = asdict(cfg)
chash = cfg.config_hash()
rows = []
for P in (100, 1000):
    for s in range(10):
        r = experiments._noisy_sweep_cell((cfg_dict, P, s, chash))
        rows.append(r)
        print(f"P={P} seed={s}: misid={r['misidentified']:.3f} f={r['f_measure']:.3f} eps={r['epsilon']:.3f}", flush=True)
json.dump(rows, open(".pilot/pilot_c5c.json", "w"), indent=1, default=float)
