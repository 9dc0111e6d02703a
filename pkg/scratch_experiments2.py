import time
import numpy as np
import trendlab as tl
from trendlab.experiments import ExperimentConfig, run_interval_experiment, run_forget_gate_experiment
from trendlab.synthetic import trend_seasonal_daily, ar_series

cfg = ExperimentConfig(train=tl.TrainConfig(epochs=250, hidden_size=16, window=12))

t0 = time.perf_counter()
daily = trend_seasonal_daily()
rep = run_interval_experiment(daily, cfg)
print(f"interval exp in {time.perf_counter()-t0:.1f}s")
wins = 0
for seed in cfg.seeds:
    w = rep.select(model="lstm", interval="weekly", seed=seed)[0].test_rmse
    d = rep.select(model="lstm", interval="daily", seed=seed)[0].test_rmse
    win = w < d
    wins += win
    print(f"  seed {seed}: weekly {w:.4f} vs daily {d:.4f} -> weekly better: {win}")
print(f"weekly wins {wins}/3")
# extra seeds for margin assessment
cfg5 = ExperimentConfig(train=tl.TrainConfig(epochs=250, hidden_size=16, window=12), seeds=(3, 4, 5))
rep5 = run_interval_experiment(daily, cfg5)
for seed in cfg5.seeds:
    w = rep5.select(model="lstm", interval="weekly", seed=seed)[0].test_rmse
    d = rep5.select(model="lstm", interval="daily", seed=seed)[0].test_rmse
    print(f"  extra seed {seed}: weekly {w:.4f} vs daily {d:.4f} -> weekly better: {w < d}")

for epochs, hidden in ((250, 16), (400, 16), (400, 24)):
    t0 = time.perf_counter()
    ar = ar_series()
    fg_cfg = ExperimentConfig(train=tl.TrainConfig(epochs=epochs, hidden_size=hidden), seeds=(0, 1, 2, 3, 4))
    fg = run_forget_gate_experiment(ar, [4, 8, 16], fg_cfg)
    print(f"forget-gate epochs={epochs} hidden={hidden} in {time.perf_counter()-t0:.1f}s")
    good = 0
    for seed in fg_cfg.seeds:
        means = fg.means_by_window(seed)
        ok = all(means[k][1] <= means[k + 1][1] for k in range(len(means) - 1))
        good += ok
        print(f"  seed {seed}: {[f'{w}:{m:.4f}' for w, m in means]} non-decreasing: {ok}")
    print(f"  -> {good}/5 seeds monotone")
