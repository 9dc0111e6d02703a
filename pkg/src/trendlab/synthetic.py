"""Deterministic synthetic market fixtures for tests and experiments.

Fixtures are generated from seeds rather than checked in as data files.
Weekly series carry consecutive Monday dates; daily series carry business
days.
"""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from .market_data import DAILY, WEEKLY, PriceBar, PriceSeries


def weekly_dates(n: int, start: date = date(2015, 1, 5)) -> list[date]:
    if start.weekday() != 0:
        raise ValueError("weekly series must start on a Monday")
    return [start + timedelta(weeks=k) for k in range(n)]


def business_dates(n: int, start: date = date(2015, 1, 5)) -> list[date]:
    out: list[date] = []
    day = start
    while len(out) < n:
        if day.weekday() < 5:
            out.append(day)
        day += timedelta(days=1)
    return out


def bars_from_adjusted(
    adjusted: np.ndarray, dates: list[date], seed: int = 0, volume_base: int = 1_000_000
) -> list[PriceBar]:
    """Wrap an adjusted-price path into OHLCV bars that satisfy the bar
    invariants: open = previous close, high/low bracket both.
    """
    adjusted = np.asarray(adjusted, dtype=np.float64)
    if adjusted.min() <= 0:
        raise ValueError("adjusted path must stay positive")
    rng = np.random.default_rng(seed)
    spreads = rng.uniform(0.05, 0.6, size=(adjusted.size, 2))
    volumes = (volume_base * (1.5 + 0.5 * np.cos(np.arange(adjusted.size) / 3.0))).astype(np.int64)
    bars = []
    prev_close = float(adjusted[0])
    for k, when in enumerate(dates):
        close = float(adjusted[k])
        opening = prev_close
        high = max(opening, close) + float(spreads[k, 0])
        low = min(opening, close) - float(spreads[k, 1])
        bars.append(
            PriceBar(
                date=when, open=opening, high=high, low=low,
                close=close, adjusted=close, volume=int(volumes[k]),
            )
        )
        prev_close = close
    return bars


def indicator_fixture(bars: int = 60, seed: int = 7) -> PriceSeries:
    """60-bar random-walk fixture used by the indicator oracles."""
    rng = np.random.default_rng(seed)
    steps = rng.normal(0.0, 1.4, size=bars)
    adjusted = 100.0 + np.cumsum(steps)
    adjusted = np.maximum(adjusted, 5.0)
    return PriceSeries("F1", WEEKLY, tuple(bars_from_adjusted(adjusted, weekly_dates(bars), seed=seed + 1)))


def sine_series(bars: int = 59, period: float = 16.0, base: float = 100.0, amplitude: float = 10.0) -> PriceSeries:
    """Noiseless sine path; with the default pipeline settings (warm-up 25,
    window 12) 59 bars yield exactly 21 windows: 20 training plus 1 test.
    """
    t = np.arange(bars, dtype=np.float64)
    adjusted = base + amplitude * np.sin(2.0 * np.pi * t / period)
    return PriceSeries("SINE", WEEKLY, tuple(bars_from_adjusted(adjusted, weekly_dates(bars), seed=1)))


def trend_seasonal_daily(bars: int = 1280, seed: int = 11) -> PriceSeries:
    """Daily series with a clean weekly-scale trend and seasonality plus
    intra-week transient noise that has largely decayed by each week's last
    session: structure is much clearer at the weekly interval than at the
    daily one.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(bars, dtype=np.float64)
    # business_dates starts on a Monday and skips weekends, so index % 5 is
    # the weekday; transients peak mid-week and settle before Friday.
    weekday_swing = np.array([1.4, 1.8, 2.0, 1.4, 0.12])[np.arange(bars) % 5]
    noise = rng.normal(0.0, 1.6, size=bars) * weekday_swing
    adjusted = 250.0 + 0.06 * t + 12.0 * np.sin(2.0 * np.pi * t / 40.0) + noise
    adjusted = np.maximum(adjusted, 5.0)
    return PriceSeries("TRSEAS", DAILY, tuple(bars_from_adjusted(adjusted, business_dates(bars), seed=seed + 1)))


# Slowly decaying order-8 autoregression: dependencies at lags 1 and 8 with
# coefficient mass near 1, so the latent level carries information far
# beyond the largest lag.
AR8_COEFFS = (0.55, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.37)


def ar_series(
    bars: int = 450,
    seed: int = 5,
    coeffs: tuple[float, ...] = AR8_COEFFS,
    obs_noise: float = 1.0,
) -> PriceSeries:
    """Order-8 autoregressive latent level observed through measurement
    noise: recovering the level rewards filtering over long histories, so
    longer windows genuinely carry more usable information.
    """
    rng = np.random.default_rng(seed)
    order = len(coeffs)
    x = np.zeros(bars + 8 * order)
    noise = rng.normal(0.0, 1.0, size=x.size)
    for k in range(order, x.size):
        x[k] = sum(c * x[k - j - 1] for j, c in enumerate(coeffs)) + noise[k]
    observed = x[-bars:] + rng.normal(0.0, obs_noise, size=bars)
    adjusted = 120.0 + 6.0 * observed
    adjusted = np.maximum(adjusted, 5.0)
    return PriceSeries("AR8", WEEKLY, tuple(bars_from_adjusted(adjusted, weekly_dates(bars), seed=seed + 1)))


def random_walk_series(bars: int = 340, seed: int = 23, step_sigma: float = 0.012) -> PriceSeries:
    """Geometric random walk: next-step moves are unpredictable from price
    history alone. Used by the sentiment-ablation fixtures.
    """
    rng = np.random.default_rng(seed)
    log_path = np.cumsum(rng.normal(0.0, step_sigma, size=bars))
    adjusted = 150.0 * np.exp(log_path)
    return PriceSeries("WALK", WEEKLY, tuple(bars_from_adjusted(adjusted, weekly_dates(bars), seed=seed + 1)))


def planted_sentiment(series: PriceSeries, seed: int = 13, noise: float = 0.04) -> dict[date, float]:
    """Sentiment that leads the label: the score at date t encodes the
    price move from t to t+1 plus a little noise, squashed into [0, 1].
    """
    rng = np.random.default_rng(seed)
    adjusted = series.adjusted()
    deltas = np.diff(adjusted)
    scale = float(np.std(deltas)) or 1.0
    scores = {}
    dates = series.dates()
    for k, when in enumerate(dates):
        if k < deltas.size:
            raw = 0.5 + 0.4 * np.tanh(deltas[k] / (1.2 * scale)) + rng.normal(0.0, noise)
        else:
            raw = 0.5
        scores[when] = float(np.clip(raw, 0.0, 1.0))
    return scores


def noise_sentiment(series: PriceSeries, seed: int = 17) -> dict[date, float]:
    """Uninformative sentiment drawn uniformly from [0, 1]."""
    rng = np.random.default_rng(seed)
    return {when: float(v) for when, v in zip(series.dates(), rng.uniform(0.0, 1.0, size=len(series)))}


def regime_fixture(
    bars_per_segment: int = 200, seed: int = 29
) -> tuple[PriceSeries, list[tuple[date, date]]]:
    """One weekly series holding a bear, a flat, and a bull segment of equal
    length, plus the three date ranges.
    """
    rng = np.random.default_rng(seed)
    n = bars_per_segment
    noise = rng.normal(0.0, 2.0, size=3 * n)
    t = np.arange(n, dtype=np.float64)
    bear = 260.0 - 0.6 * t
    flat = np.full(n, bear[-1])
    bull = flat[-1] + 0.6 * t
    adjusted = np.concatenate([bear, flat, bull]) + noise
    adjusted = np.maximum(adjusted, 5.0)
    dates = weekly_dates(3 * n, start=date(2000, 1, 3))
    series = PriceSeries("REGIME", WEEKLY, tuple(bars_from_adjusted(adjusted, dates, seed=seed + 1)))
    segments = [
        (dates[0], dates[n - 1]),
        (dates[n], dates[2 * n - 1]),
        (dates[2 * n], dates[3 * n - 1]),
    ]
    return series, segments


def paper_shaped_series(seed: int = 3) -> PriceSeries:
    """Weekly series spanning 2000-01-03 to 2017-09-11 whose shape matches
    the preset regime segments: a two-year decline from February 2000, a
    flat stretch from September 2004, and a two-year climb from August 2013.
    """
    start = date(2000, 1, 3)
    end = date(2017, 9, 11)
    dates = []
    day = start
    while day <= end:
        dates.append(day)
        day += timedelta(weeks=1)
    rng = np.random.default_rng(seed)
    n = len(dates)
    adjusted = np.empty(n)
    level = 1800.0
    for k, when in enumerate(dates):
        if date(2000, 2, 1) <= when <= date(2002, 1, 31):
            drift = -9.0
        elif date(2004, 9, 1) <= when <= date(2006, 8, 31):
            drift = 0.0
        elif date(2013, 8, 1) <= when <= date(2015, 7, 31):
            drift = 9.0
        else:
            drift = 0.8
        level = max(level + drift + rng.normal(0.0, 4.0), 50.0)
        adjusted[k] = level
    return PriceSeries("SHAPED", WEEKLY, tuple(bars_from_adjusted(adjusted, dates, seed=seed + 1)))
