"""Technical-analysis features: RSI, CCI, and MACD.

Each function returns only the defined values; warm-up indices are omitted.
The first defined value of `rsi(series, p)` sits at bar index p, of
`cci(series, p)` at p-1, and of `macd(series, fast, slow)` at slow-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .market_data import PriceSeries


@dataclass(frozen=True)
class IndicatorConfig:
    rsi_period: int = 14
    cci_period: int = 20
    cci_constant: float = 0.015
    macd_fast: int = 12
    macd_slow: int = 26
    macd_signal: int = 9

    def __post_init__(self):
        for name in ("rsi_period", "cci_period", "macd_fast", "macd_slow"):
            if getattr(self, name) < 2:
                raise ConfigError(f"{name} must be >= 2, got {getattr(self, name)}")
        if self.macd_signal < 1:
            raise ConfigError(f"macd_signal must be >= 1, got {self.macd_signal}")
        if not self.macd_fast < self.macd_slow:
            raise ConfigError(
                f"macd_fast ({self.macd_fast}) must be smaller than macd_slow ({self.macd_slow})"
            )
        if not self.cci_constant > 0:
            raise ConfigError(f"cci_constant must be positive, got {self.cci_constant}")

    @property
    def warmup(self) -> int:
        """First bar index at which every indicator is defined."""
        return max(self.rsi_period, self.cci_period - 1, self.macd_slow - 1)


def rsi(series: PriceSeries, period: int = 14) -> np.ndarray:
    """Relative Strength Index with Wilder smoothing, in [0, 100].

    RSI_t = 100 - 100 / (1 + avgGain_t / avgLoss_t) over adjusted-price
    deltas; the seed averages are plain means of the first `period` deltas,
    then avg_t = (avg_{t-1} * (period-1) + x_t) / period. A window with zero
    losses reads 100, zero gains reads 0, and a perfectly flat window reads
    the neutral 50.
    """
    if period < 2:
        raise ConfigError(f"rsi period must be >= 2, got {period}")
    prices = series.adjusted()
    if prices.size < period + 1:
        raise DataError(f"series too short for RSI-{period}: {prices.size} bars")
    deltas = np.diff(prices)
    gains = np.maximum(deltas, 0.0)
    losses = np.maximum(-deltas, 0.0)

    out = np.empty(prices.size - period, dtype=np.float64)
    avg_gain = gains[:period].mean()
    avg_loss = losses[:period].mean()
    out[0] = _rsi_value(avg_gain, avg_loss)
    for k in range(period, deltas.size):
        avg_gain = (avg_gain * (period - 1) + gains[k]) / period
        avg_loss = (avg_loss * (period - 1) + losses[k]) / period
        out[k - period + 1] = _rsi_value(avg_gain, avg_loss)
    return out


def _rsi_value(avg_gain: float, avg_loss: float) -> float:
    if avg_loss == 0.0 and avg_gain == 0.0:
        return 50.0
    if avg_loss == 0.0:
        return 100.0
    return 100.0 - 100.0 / (1.0 + avg_gain / avg_loss)


def cci(series: PriceSeries, period: int = 20, constant: float = 0.015) -> np.ndarray:
    """Commodity Channel Index over the typical price (high+low+close)/3.

    CCI_t = (TP_t - SMA(TP, period)_t) / (constant * MAD_t) where MAD is the
    mean absolute deviation of the window's typical prices about the window
    SMA. A window with zero deviation (flat market) reads 0.
    """
    if period < 2:
        raise ConfigError(f"cci period must be >= 2, got {period}")
    if constant <= 0:
        raise ConfigError(f"cci constant must be positive, got {constant}")
    bars = series.bars
    if len(bars) < period:
        raise DataError(f"series too short for CCI-{period}: {len(bars)} bars")
    tp = np.array([(b.high + b.low + b.close) / 3.0 for b in bars], dtype=np.float64)

    out = np.empty(tp.size - period + 1, dtype=np.float64)
    for t in range(period - 1, tp.size):
        win = tp[t - period + 1 : t + 1]
        sma = win.mean()
        mad = np.abs(win - sma).mean()
        out[t - period + 1] = 0.0 if mad == 0.0 else (tp[t] - sma) / (constant * mad)
    return out


def ema(values: np.ndarray, period: int) -> np.ndarray:
    """Exponential moving average, smoothing 2/(period+1), seeded with the
    SMA of the first `period` values. First defined value at index period-1.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size < period:
        raise DataError(f"too few values for EMA-{period}: {values.size}")
    alpha = 2.0 / (period + 1.0)
    out = np.empty(values.size - period + 1, dtype=np.float64)
    out[0] = values[:period].mean()
    for k in range(period, values.size):
        out[k - period + 1] = alpha * values[k] + (1.0 - alpha) * out[k - period]
    return out


def macd(series: PriceSeries, fast: int = 12, slow: int = 26) -> np.ndarray:
    """MACD line: EMA(adjusted, fast) - EMA(adjusted, slow).

    First defined value at bar index slow-1.
    """
    if not fast < slow:
        raise ConfigError(f"macd fast ({fast}) must be smaller than slow ({slow})")
    prices = series.adjusted()
    if prices.size < slow:
        raise DataError(f"series too short for MACD-{fast}/{slow}: {prices.size} bars")
    fast_ema = ema(prices, fast)
    slow_ema = ema(prices, slow)
    return fast_ema[slow - fast :] - slow_ema
