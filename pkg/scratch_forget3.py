import time
import trendlab as tl
from trendlab.experiments import ExperimentConfig, run_forget_gate_experiment
from trendlab.synthetic import ar_series

variants = [
    ("obs1.0 b450 h8 L3 e600 lr.01", dict(obs_noise=1.0, bars=450), dict(epochs=600, hidden_size=8, layers=3)),
    ("obs1.0 b450 h8 L3 e800 lr.005", dict(obs_noise=1.0, bars=450),
     dict(epochs=800, hidden_size=8, layers=3, learning_rate=0.005)),
    ("obs0.8 b450 h8 L2 e600 lr.01", dict(obs_noise=0.8, bars=450), dict(epochs=600, hidden_size=8, layers=2)),
    ("obs1.2 b450 h8 L3 e600 lr.01", dict(obs_noise=1.2, bars=450), dict(epochs=600, hidden_size=8, layers=3)),
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
