import time
import trendlab as tl
from trendlab.experiments import ExperimentConfig, run_forget_gate_experiment
from trendlab.synthetic import ar_series

variants = [
    ("base obs0.6 h8 L3 e600", dict(obs_noise=0.6), dict(epochs=600, hidden_size=8, layers=3)),
    ("obs1.0 h8 L3 e600", dict(obs_noise=1.0), dict(epochs=600, hidden_size=8, layers=3)),
    ("lag1=0.7 lag8=0.22 obs0.8", dict(coeffs=(0.7, 0, 0, 0, 0, 0, 0, 0.22), obs_noise=0.8),
     dict(epochs=600, hidden_size=8, layers=3)),
    ("base obs0.6 h16 L3 e600", dict(obs_noise=0.6), dict(epochs=600, hidden_size=16, layers=3)),
]

for name, arkw, trkw in variants:
    t0 = time.perf_counter()
    ar = ar_series(**arkw)
    fg_cfg = ExperimentConfig(train=tl.TrainConfig(window=12, **trkw), seeds=(0, 1, 2, 3, 4))
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
