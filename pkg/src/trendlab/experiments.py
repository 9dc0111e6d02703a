"""Market-regime segmentation and the experiment runners: interval
comparison, regime comparison, sentiment ablation, and forget-gate
analysis.

Every runner is a pure function of (data, config, seed set): identical
inputs produce identical reports, cell failures become explicit error rows,
and independent cells may run in parallel without changing the result.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import date
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DataError, TrendlabError
from .features import FeatureFrame, build_feature_frame, prepare_dataset
from .indicators import IndicatorConfig
from .market_data import DAILY, WEEKLY, PriceSeries, fit_scale, normalize, resample_weekly
from .network import LSTM, RNN, all_gate_traces, forward_batch, mean_forget_activation
from .reports import ExperimentReport, ForgetGateReport, ForgetGateRow, ReportRow
from .training import TrainConfig, train

MODELS = (LSTM, RNN)
FULL_FEATURES = "full"
NO_SENTIMENT = "no-sentiment"
ALL_REGIMES = "all"


class RegimeLabel(str, Enum):
    BULL = "bull"
    BEAR = "bear"
    FLAT = "flat"


# Two-year study segments: a declining, a sideways, and a rising stretch.
PAPER_SEGMENTS: tuple[tuple[date, date], ...] = (
    (date(2000, 2, 1), date(2002, 1, 31)),
    (date(2004, 9, 1), date(2006, 8, 31)),
    (date(2013, 8, 1), date(2015, 7, 31)),
)

SEGMENT_LENGTH_TOLERANCE_DAYS = 7


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig = TrainConfig()
    indicators: IndicatorConfig = IndicatorConfig()
    seeds: tuple[int, ...] = (0, 1, 2)
    ratio: tuple[int, int] = (15, 1)
    scale_fit: str = "train"
    regime_threshold: float = 0.15
    workers: int = 0


def classify_regime(segment: PriceSeries, threshold: float = 0.15) -> RegimeLabel:
    """Label a segment bull, bear, or flat by the least-squares slope of its
    normalized adjusted price, measured in normalized units over the whole
    segment span.
    """
    if len(segment) < 8:
        raise DataError(f"segment too short to classify: {len(segment)} bars")
    adjusted = segment.adjusted()
    if adjusted.max() == adjusted.min():
        return RegimeLabel.FLAT
    values = normalize(adjusted, fit_scale(segment))
    t = np.arange(values.size, dtype=np.float64)
    t_centered = t - t.mean()
    slope = float(t_centered @ (values - values.mean()) / (t_centered @ t_centered))
    span_slope = slope * (values.size - 1)
    if span_slope > threshold:
        return RegimeLabel.BULL
    if span_slope < -threshold:
        return RegimeLabel.BEAR
    return RegimeLabel.FLAT


def _run_cells(tasks: Sequence[Callable[[], ReportRow]], workers: int) -> list[ReportRow]:
    if workers and workers > 0:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda task: task(), tasks))
    return [task() for task in tasks]


def _cell(
    make_row: Callable[[], ReportRow],
    fallback: ReportRow,
) -> Callable[[], ReportRow]:
    def run() -> ReportRow:
        try:
            return make_row()
        except TrendlabError as exc:
            return replace(fallback, error=str(exc))

    return run


def _train_row(
    frame: FeatureFrame,
    model: str,
    seed: int,
    config: ExperimentConfig,
    timer: Callable[[], float],
    *,
    interval: str,
    regime: str,
    features: str,
    window: int | None = None,
) -> ReportRow:
    window = window if window is not None else config.train.window
    bundle = prepare_dataset(frame, window, config.ratio, config.scale_fit)
    train_config = replace(config.train, cell=model, seed=seed, window=window)
    started = timer()
    run = train(bundle.dataset, train_config, timer=timer)
    wall_ms = (timer() - started) * 1000.0
    if run.test_rmse is None:
        raise DataError("experiment dataset produced an empty test split")
    return ReportRow(
        model=model, interval=interval, regime=regime, features=features, seed=seed,
        train_rmse=run.train_rmse, test_rmse=run.test_rmse, wall_ms=wall_ms,
    )


def run_interval_experiment(
    daily: PriceSeries,
    config: ExperimentConfig,
    sentiment: Mapping[date, float] | None = None,
    timer: Callable[[], float] = time.perf_counter,
) -> ExperimentReport:
    """Train both models on the daily series and on its weekly resample,
    identical pipeline otherwise; one row per (model, interval, seed).
    """
    if daily.interval != DAILY:
        raise DataError("interval experiment needs a daily input series")
    series_by_interval = {DAILY: daily, WEEKLY: resample_weekly(daily)}

    tasks = []
    for interval in (DAILY, WEEKLY):
        for model in MODELS:
            for seed in config.seeds:
                fallback = ReportRow(
                    model=model, interval=interval, regime=ALL_REGIMES,
                    features=FULL_FEATURES, seed=seed,
                    train_rmse=float("nan"), test_rmse=float("nan"), wall_ms=float("nan"),
                )

                def make_row(interval=interval, model=model, seed=seed) -> ReportRow:
                    frame = build_feature_frame(series_by_interval[interval], config.indicators, sentiment)
                    return _train_row(
                        frame, model, seed, config, timer,
                        interval=interval, regime=ALL_REGIMES, features=FULL_FEATURES,
                    )

                tasks.append(_cell(make_row, fallback))
    return ExperimentReport(rows=tuple(_run_cells(tasks, config.workers)))


def run_regime_experiment(
    series: PriceSeries,
    segments: Sequence[tuple[date, date]],
    config: ExperimentConfig,
    sentiment: Mapping[date, float] | None = None,
    timer: Callable[[], float] = time.perf_counter,
) -> ExperimentReport:
    """Classify each equal-length segment and train/evaluate both models on
    it; one row per (segment, model, seed).
    """
    if not segments:
        raise DataError("no segments given")
    durations = [(end - start).days for start, end in segments]
    if any(d <= 0 for d in durations):
        raise DataError("segment end must follow its start")
    if max(durations) - min(durations) > SEGMENT_LENGTH_TOLERANCE_DAYS:
        raise DataError(
            f"segments must cover equal periods (within {SEGMENT_LENGTH_TOLERANCE_DAYS} days); "
            f"got spans of {sorted(set(durations))} days"
        )

    tasks = []
    for start, end in segments:
        segment = series.between(start, end)
        label = classify_regime(segment, config.regime_threshold)
        for model in MODELS:
            for seed in config.seeds:
                fallback = ReportRow(
                    model=model, interval=series.interval, regime=label.value,
                    features=FULL_FEATURES, seed=seed,
                    train_rmse=float("nan"), test_rmse=float("nan"), wall_ms=float("nan"),
                )

                def make_row(segment=segment, label=label, model=model, seed=seed) -> ReportRow:
                    frame = build_feature_frame(segment, config.indicators, sentiment)
                    return _train_row(
                        frame, model, seed, config, timer,
                        interval=series.interval, regime=label.value, features=FULL_FEATURES,
                    )

                tasks.append(_cell(make_row, fallback))
    return ExperimentReport(rows=tuple(_run_cells(tasks, config.workers)))


def run_sentiment_ablation(
    frame: FeatureFrame,
    config: ExperimentConfig,
    interval: str = WEEKLY,
    timer: Callable[[], float] = time.perf_counter,
) -> ExperimentReport:
    """Train both models with and without the sentiment stream; the ablated
    variant simply omits the stream (input width 2*d_I instead of 3*d_I).
    """
    if frame.sentiment is None:
        raise DataError("missing sentiment column in the full variant")
    variants = ((FULL_FEATURES, frame), (NO_SENTIMENT, frame.without_sentiment()))

    tasks = []
    for features, variant in variants:
        for model in MODELS:
            for seed in config.seeds:
                fallback = ReportRow(
                    model=model, interval=interval, regime=ALL_REGIMES,
                    features=features, seed=seed,
                    train_rmse=float("nan"), test_rmse=float("nan"), wall_ms=float("nan"),
                )

                def make_row(variant=variant, features=features, model=model, seed=seed) -> ReportRow:
                    return _train_row(
                        variant, model, seed, config, timer,
                        interval=interval, regime=ALL_REGIMES, features=features,
                    )

                tasks.append(_cell(make_row, fallback))
    return ExperimentReport(rows=tuple(_run_cells(tasks, config.workers)))


def run_forget_gate_experiment(
    series: PriceSeries,
    window_sizes: Sequence[int],
    config: ExperimentConfig,
    sentiment: Mapping[date, float] | None = None,
    timer: Callable[[], float] = time.perf_counter,
) -> ForgetGateReport:
    """Train one memory-cell model per window size and report the mean
    forget-gate activation over the test windows.
    """
    if not window_sizes:
        raise DataError("no window sizes given")
    frame = build_feature_frame(series, config.indicators, sentiment)

    rows = []
    for window in window_sizes:
        bundle = prepare_dataset(frame, window, config.ratio, config.scale_fit)
        for seed in config.seeds:
            train_config = replace(config.train, cell=LSTM, seed=seed, window=window)
            try:
                run = train(bundle.dataset, train_config, timer=timer)
            except TrendlabError as exc:
                raise DataError(f"window size {window}, seed {seed}: {exc}") from exc
            test = bundle.dataset.test
            if test.n_windows == 0:
                raise DataError(f"window size {window}: empty test split")
            cache = forward_batch(test.streams, run.parameters)
            mean = mean_forget_activation(all_gate_traces(cache))
            rows.append(ForgetGateRow(window=window, seed=seed, mean_forget=mean))
    return ForgetGateReport(rows=tuple(rows))
