import time
import numpy as np
import trendlab as tl
from trendlab.network import ModelShape
from trendlab.training import gradient_check

# 1. gradient check, LSTM, acceptance shape
t0 = time.perf_counter()
shape = ModelShape(cell="lstm", d_a=3, d_f=3, d_s=1, d_i=2, layers=3, hidden=8)
res = gradient_check(shape, seed=0, tolerance=1e-5, steps=5)
print("lstm fused_dim", shape.fused_dim, "max_err", res.max_error, "passed", res.passed,
      f"{time.perf_counter()-t0:.2f}s")

# 2. RNN gradient check
shape_r = ModelShape(cell="rnn", d_a=3, d_f=3, d_s=1, d_i=2, layers=3, hidden=8)
res_r = gradient_check(shape_r, seed=1, steps=5)
print("rnn max_err", res_r.max_error, "passed", res_r.passed)

# 3. no-sentiment variant
shape_n = ModelShape(cell="lstm", d_a=3, d_f=3, d_s=None, d_i=2, layers=2, hidden=6)
res_n = gradient_check(shape_n, seed=2, steps=4)
print("ablated max_err", res_n.max_error, "passed", res_n.passed)

# 4. corrupt hook
res_c = gradient_check(shape_n, seed=2, steps=4, corrupt_block="layers.0.W_f")
print("corrupt passed", res_c.passed, "failing", res_c.failing_blocks)

# 5. training loop on sine fixture
from trendlab.synthetic import sine_series
from trendlab.features import build_feature_frame, prepare_dataset

series = sine_series()
frame = build_feature_frame(series)
bundle = prepare_dataset(frame, window=12)
ds = bundle.dataset
print("windows", ds.n_windows, "train", ds.split_index, "test", ds.n_windows - ds.split_index)

cfg = tl.TrainConfig(epochs=200, seed=0)
t0 = time.perf_counter()
run = tl.train(ds, cfg)
print(f"200 epochs in {time.perf_counter()-t0:.2f}s; first {run.epoch_rmse[0]:.4f} "
      f"last {run.epoch_rmse[-1]:.4f} final train {run.train_rmse:.4f} test {run.test_rmse:.4f}")

cfg2k = tl.TrainConfig(epochs=2000, seed=0)
t0 = time.perf_counter()
run2k = tl.train(ds, cfg2k)
print(f"2000 epochs in {time.perf_counter()-t0:.2f}s; final train {run2k.train_rmse:.5f} test {run2k.test_rmse:.5f}")
