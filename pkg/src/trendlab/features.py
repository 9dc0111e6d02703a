"""Feature frame assembly: joins price, indicator, and sentiment columns,
handles the feature CSV interchange format, and prepares normalized
windowed datasets.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from datetime import date
from typing import Mapping

import numpy as np

from .errors import DataError
from .indicators import IndicatorConfig, cci, macd, rsi
from .market_data import (
    FeatureRow,
    NormalizationScale,
    PriceSeries,
    WindowedDataset,
    compute_tdd,
    make_windows,
    normalize,
    train_window_count,
)

INDEX_FUNDAMENTALS = ("Adj. Price", "Trading Vol.", "TDD")
COMPANY_FUNDAMENTALS = ("PBR", "PER", "PSR")
TECHNICALS = ("RSI", "CCI", "MACD")
SENTIMENT_COLUMN = "Sentiment"
ANSWER_COLUMN = "Answer"

NEUTRAL_SENTIMENT = 0.5


@dataclass(frozen=True)
class FeatureFrame:
    """Aligned raw feature rows; one row per usable time step.

    `prices[t]` is the adjusted price at row t (the label source) and
    `answers[t]` the adjusted price of the following step (the Answer
    column). All values are raw; normalization happens in
    `prepare_dataset`.
    """

    fundamental: np.ndarray
    technical: np.ndarray
    sentiment: np.ndarray | None
    prices: np.ndarray
    answers: np.ndarray
    fundamental_names: tuple[str, ...]
    technical_names: tuple[str, ...] = TECHNICALS
    dates: tuple[date, ...] | None = None

    def __post_init__(self):
        n = self.prices.shape[0]
        if n == 0:
            raise DataError("empty feature frame")
        if self.fundamental.shape != (n, len(self.fundamental_names)):
            raise DataError("fundamental block misaligned")
        if self.technical.shape != (n, len(self.technical_names)):
            raise DataError("technical block misaligned")
        if self.sentiment is not None and self.sentiment.shape[0] != n:
            raise DataError("sentiment block misaligned")
        if self.answers.shape != (n,):
            raise DataError("answers misaligned")
        if self.dates is not None and len(self.dates) != n:
            raise DataError("dates misaligned")

    @property
    def n(self) -> int:
        return self.prices.shape[0]

    def without_sentiment(self) -> "FeatureFrame":
        return replace(self, sentiment=None)


def build_feature_frame(
    series: PriceSeries,
    config: IndicatorConfig = IndicatorConfig(),
    sentiment_by_date: Mapping[date, float] | None = None,
) -> FeatureFrame:
    """Assemble the index-style feature frame from a price series.

    Rows start at the first bar where TDD and every indicator are defined
    and stop one bar before the series end so the Answer column stays
    defined. With no sentiment source every row gets the neutral 0.5.
    """
    n = len(series)
    start = max(1, config.warmup)
    if start > n - 2:
        raise DataError(
            f"indicator warm-up exhausts data: need more than {start + 2} bars, got {n}"
        )
    adjusted = series.adjusted()
    volume = np.array([b.volume for b in series.bars], dtype=np.float64)
    tdd = compute_tdd(series)  # tdd[k] belongs to bar k+1
    rsi_vals = rsi(series, config.rsi_period)          # defined from rsi_period
    cci_vals = cci(series, config.cci_period, config.cci_constant)  # from cci_period-1
    macd_vals = macd(series, config.macd_fast, config.macd_slow)    # from macd_slow-1

    rows = range(start, n - 1)
    fundamental = np.column_stack([
        adjusted[start : n - 1],
        volume[start : n - 1],
        tdd[start - 1 : n - 2],
    ])
    technical = np.column_stack([
        rsi_vals[start - config.rsi_period : n - 1 - config.rsi_period],
        cci_vals[start - (config.cci_period - 1) : n - 1 - (config.cci_period - 1)],
        macd_vals[start - (config.macd_slow - 1) : n - 1 - (config.macd_slow - 1)],
    ])

    dates = series.dates()
    if sentiment_by_date is None:
        sentiment = np.full((len(fundamental), 1), NEUTRAL_SENTIMENT)
    else:
        missing = [dates[t] for t in rows if dates[t] not in sentiment_by_date]
        if missing:
            raise DataError(
                f"unjoinable sentiment dates: {len(missing)} rows lack sentiment, first {missing[0]}"
            )
        sentiment = np.array([[float(sentiment_by_date[dates[t]])] for t in rows])
        if sentiment.min() < 0.0 or sentiment.max() > 1.0:
            raise DataError("sentiment values must lie in [0, 1]")

    return FeatureFrame(
        fundamental=fundamental,
        technical=technical,
        sentiment=sentiment,
        prices=adjusted[start : n - 1],
        answers=adjusted[start + 1 : n],
        fundamental_names=INDEX_FUNDAMENTALS,
        dates=tuple(dates[start : n - 1]),
    )


def feature_frame_to_csv(frame: FeatureFrame) -> str:
    """Serialize raw feature rows in the interchange column order."""
    if frame.sentiment is None:
        raise DataError("cannot write a feature CSV without a sentiment column")
    if frame.sentiment.shape[1] != 1:
        raise DataError("feature CSV expects a single sentiment column")
    header = frame.fundamental_names + frame.technical_names + (SENTIMENT_COLUMN, ANSWER_COLUMN)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for k in range(frame.n):
        writer.writerow(
            [repr(float(v)) for v in frame.fundamental[k]]
            + [repr(float(v)) for v in frame.technical[k]]
            + [repr(float(frame.sentiment[k, 0])), repr(float(frame.answers[k]))]
        )
    return out.getvalue()


def parse_feature_csv(text: str) -> FeatureFrame:
    """Parse an index-style or company-style feature CSV.

    Company-style frames carry no per-row price column, so the first row is
    dropped and prices are recovered from the shifted Answer column.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(h.strip() for h in next(reader))
    except StopIteration:
        raise DataError("empty file: missing header") from None

    index_header = INDEX_FUNDAMENTALS + TECHNICALS + (SENTIMENT_COLUMN, ANSWER_COLUMN)
    company_header = COMPANY_FUNDAMENTALS + TECHNICALS + (SENTIMENT_COLUMN, ANSWER_COLUMN)
    if header == index_header:
        fundamental_names = INDEX_FUNDAMENTALS
    elif header == company_header:
        fundamental_names = COMPANY_FUNDAMENTALS
    else:
        raise DataError(f"unexpected feature header {header!r}")

    values: list[list[float]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            values.append([float(v) for v in row])
        except ValueError as exc:
            raise DataError(f"line {lineno}: malformed row: {exc}") from None
    if not values:
        raise DataError("empty feature frame")
    mat = np.array(values, dtype=np.float64)

    sentiment = mat[:, 6:7]
    if sentiment.min() < 0.0 or sentiment.max() > 1.0:
        raise DataError("sentiment values must lie in [0, 1]")
    answers = mat[:, 7]
    if answers.min() <= 0.0:
        raise DataError("Answer column must hold positive prices")

    if fundamental_names is INDEX_FUNDAMENTALS:
        prices = mat[:, 0]
        if prices.min() <= 0.0:
            raise DataError("Adj. Price column must hold positive prices")
        keep = slice(0, mat.shape[0])
    else:
        # Row 0 has no known at-row price; realign on the shifted answers.
        if mat.shape[0] < 2:
            raise DataError("company-style frame needs at least 2 rows")
        prices = mat[:-1, 7]
        keep = slice(1, mat.shape[0])

    return FeatureFrame(
        fundamental=mat[keep, 0:3],
        technical=mat[keep, 3:6],
        sentiment=sentiment[keep],
        prices=prices,
        answers=answers[keep],
        fundamental_names=fundamental_names,
    )


@dataclass(frozen=True)
class DatasetBundle:
    """A windowed dataset together with the scales that normalized it."""

    dataset: WindowedDataset
    price_scale: NormalizationScale
    column_scales: dict[str, NormalizationScale | None]
    frame: FeatureFrame

    @property
    def columns(self) -> dict:
        return {
            "fundamental": list(self.frame.fundamental_names),
            "technical": list(self.frame.technical_names),
            "sentiment": None if self.frame.sentiment is None else [SENTIMENT_COLUMN],
        }


def _column_scale(values: np.ndarray) -> NormalizationScale | None:
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return None  # constant column maps to zero
    return NormalizationScale(lo, hi)


def _apply_scales(block: np.ndarray, scales: list[NormalizationScale | None]) -> np.ndarray:
    out = np.empty_like(block)
    for j, scale in enumerate(scales):
        out[:, j] = 0.0 if scale is None else normalize(block[:, j], scale)
    return out


def prepare_dataset(
    frame: FeatureFrame,
    window: int,
    ratio: tuple[int, int] = (15, 1),
    scale_fit: str = "train",
) -> DatasetBundle:
    """Normalize a raw frame and slide it into train/test windows.

    Every non-sentiment column is min-max mapped onto [-1, 1]; labels use
    the adjusted-price scale. With scale_fit="train" (the default) scales
    are fitted on rows up to the last training label so no test-period
    statistics leak backwards; "full" fits on the whole frame instead.
    """
    if scale_fit not in ("train", "full"):
        raise DataError(f"scale_fit must be 'train' or 'full', got {scale_fit!r}")
    n = frame.n
    count = n - window
    if count < 1:
        raise DataError(f"insufficient rows: {n} rows for window {window}")
    if scale_fit == "train":
        span_end = (train_window_count(count, ratio) - 1) + window
    else:
        span_end = n - 1
    fit = slice(0, span_end + 1)

    price_scale = NormalizationScale.from_values(frame.prices[fit])
    fund_scales = [_column_scale(frame.fundamental[fit, j]) for j in range(frame.fundamental.shape[1])]
    tech_scales = [_column_scale(frame.technical[fit, j]) for j in range(frame.technical.shape[1])]

    fundamental = _apply_scales(frame.fundamental, fund_scales)
    technical = _apply_scales(frame.technical, tech_scales)
    labels = normalize(frame.prices, price_scale)

    rows = [
        FeatureRow(
            fundamental=fundamental[k],
            technical=technical[k],
            sentiment=None if frame.sentiment is None else frame.sentiment[k],
            answer=float(frame.answers[k]),
        )
        for k in range(n)
    ]
    dataset = make_windows(rows, labels, window, ratio)

    column_scales: dict[str, NormalizationScale | None] = {}
    for name, scale in zip(frame.fundamental_names, fund_scales):
        column_scales[name] = scale
    for name, scale in zip(frame.technical_names, tech_scales):
        column_scales[name] = scale
    return DatasetBundle(dataset=dataset, price_scale=price_scale, column_scales=column_scales, frame=frame)


def inference_windows(
    frame: FeatureFrame,
    window: int,
    column_scales: Mapping[str, NormalizationScale | None],
    use_sentiment: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Stream windows for prediction, normalized with previously fitted
    scales. Includes the final window, whose next step is unobserved, so a
    frame of n rows yields n - window + 1 windows.
    """
    n = frame.n
    if n < window:
        raise DataError(f"insufficient history: {n} rows for window {window}")
    try:
        fund_scales = [column_scales[name] for name in frame.fundamental_names]
        tech_scales = [column_scales[name] for name in frame.technical_names]
    except KeyError as exc:
        raise DataError(f"checkpoint lacks a scale for column {exc}") from None
    fundamental = _apply_scales(frame.fundamental, fund_scales)
    technical = _apply_scales(frame.technical, tech_scales)

    count = n - window + 1
    a = np.stack([fundamental[k : k + window] for k in range(count)])
    f = np.stack([technical[k : k + window] for k in range(count)])
    if use_sentiment:
        if frame.sentiment is None:
            raise DataError("checkpoint expects a sentiment stream but the frame has none")
        s = np.stack([frame.sentiment[k : k + window] for k in range(count)])
    else:
        s = None
    return a, f, s
