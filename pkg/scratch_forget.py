import time
import numpy as np
import trendlab as tl
from trendlab.experiments import ExperimentConfig, run_forget_gate_experiment
from trendlab.synthetic import ar_series

variants = [
    ("lag8=0.85 h8 L3 e600", (0,)*7 + (0.85,), dict(epochs=600, hidden_size=8, layers=3)),
    ("lag8=0.85 h16 L3 e600", (0,)*7 + (0.85,), dict(epochs=600, hidden_size=16, layers=3)),
    ("stag h8 L2 e600", (0.0, 0.2, 0.0, 0.0, 0.25, 0.0, 0.0, 0.42), dict(epochs=600, hidden_size=8, layers=2)),
    ("lag8=0.85 h8 L2 e1000", (0,)*7 + (0.85,), dict(epochs=1000, hidden_size=8, layers=2)),
]

for name, coeffs, kw in variants:
    t0 = time.perf_counter()
    ar = ar_series(coeffs=coeffs)
    fg_cfg = ExperimentConfig(train=tl.TrainConfig(window=12, **kw), seeds=(0, 1, 2, 3, 4))
    fg = run_forget_gate_experiment(ar, [4, 8, 16], fg_cfg)
    good = 0
    detail = []
    for seed in fg_cfg.seeds:
        means = fg.means_by_window(seed)
        ok = all(means[k][1] <= means[k + 1][1] for k in range(len(means) - 1))
        good += ok
        detail.append(f"s{seed}:{'/'.join(f'{m:.3f}' for _, m in means)}{'+' if ok else '-'}")
    print(f"{name}: {good}/5 monotone in {time.perf_counter()-t0:.0f}s")
    print("   " + "  ".join(detail))
