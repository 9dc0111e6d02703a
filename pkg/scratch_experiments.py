import time
import numpy as np
import trendlab as tl
from trendlab.experiments import ExperimentConfig, run_interval_experiment, run_forget_gate_experiment, run_sentiment_ablation, run_regime_experiment, classify_regime
from trendlab.features import build_feature_frame, prepare_dataset
from trendlab.synthetic import trend_seasonal_daily, ar_series, random_walk_series, planted_sentiment, noise_sentiment, regime_fixture

cfg = ExperimentConfig(train=tl.TrainConfig(epochs=250, hidden_size=16, window=12))

t0 = time.perf_counter()
daily = trend_seasonal_daily()
rep = run_interval_experiment(daily, cfg)
print(f"interval exp in {time.perf_counter()-t0:.1f}s")
for r in rep.rows:
    print(f"  {r.model:4s} {r.interval:6s} seed {r.seed}: train {r.train_rmse:.4f} test {r.test_rmse:.4f} {r.error}")
for seed in cfg.seeds:
    w = rep.select(model="lstm", interval="weekly", seed=seed)[0].test_rmse
    d = rep.select(model="lstm", interval="daily", seed=seed)[0].test_rmse
    print(f"  seed {seed}: weekly {w:.4f} vs daily {d:.4f} -> weekly better: {w < d}")

t0 = time.perf_counter()
ar = ar_series()
fg_cfg = ExperimentConfig(train=tl.TrainConfig(epochs=250, hidden_size=16))
fg = run_forget_gate_experiment(ar, [4, 8, 16], fg_cfg)
print(f"forget-gate exp in {time.perf_counter()-t0:.1f}s")
for seed in fg_cfg.seeds:
    means = fg.means_by_window(seed)
    ok = all(means[k][1] <= means[k+1][1] for k in range(len(means)-1))
    print(f"  seed {seed}: {[f'{w}:{m:.4f}' for w, m in means]} non-decreasing: {ok}")

t0 = time.perf_counter()
walk = random_walk_series()
frame_planted = build_feature_frame(walk, sentiment_by_date=planted_sentiment(walk))
frame_noise = build_feature_frame(walk, sentiment_by_date=noise_sentiment(walk))
ab_cfg = ExperimentConfig(train=tl.TrainConfig(epochs=250, hidden_size=16, window=12))
rep_p = run_sentiment_ablation(frame_planted, ab_cfg)
rep_n = run_sentiment_ablation(frame_noise, ab_cfg)
print(f"ablation exps in {time.perf_counter()-t0:.1f}s")
for name, rep2 in (("planted", rep_p), ("noise", rep_n)):
    fulls = [r.test_rmse for r in rep2.select(model="lstm", features="full")]
    abls = [r.test_rmse for r in rep2.select(model="lstm", features="no-sentiment")]
    wins = sum(f < a for f, a in zip(fulls, abls))
    print(f"  {name}: full {np.round(fulls,4)} ablated {np.round(abls,4)} wins {wins}/3")
    gap = abs(np.mean(fulls) - np.mean(abls))
    sigma = (np.std(fulls) + np.std(abls)) / 2
    print(f"    gap {gap:.4f} vs seed sigma {sigma:.4f} (2x: {2*sigma:.4f})")

t0 = time.perf_counter()
series, segments = regime_fixture()
for s, e in segments:
    print("  segment", s, e, classify_regime(series.between(s, e)))
rg_cfg = ExperimentConfig(train=tl.TrainConfig(epochs=250, hidden_size=16, window=12))
rep_g = run_regime_experiment(series, segments, rg_cfg)
print(f"regime exp in {time.perf_counter()-t0:.1f}s")
for seed in rg_cfg.seeds:
    vals = {}
    for reg in ("bear", "flat", "bull"):
        rows = rep_g.select(model="lstm", regime=reg, seed=seed)
        vals[reg] = rows[0].test_rmse if rows else float("nan")
    worst = max(vals, key=vals.get)
    print(f"  seed {seed}: {vals} worst: {worst}")
