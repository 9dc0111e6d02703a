"""Experiment report rows, aggregation, and CSV/JSON emission.

CSV columns are fixed: model,interval,regime,features,seed,train_rmse,
test_rmse,wall_ms,error. Floats are written with full shortest-round-trip
precision so reruns with identical inputs produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

REPORT_SCHEMA_VERSION = 1
REPORT_COLUMNS = (
    "model", "interval", "regime", "features", "seed",
    "train_rmse", "test_rmse", "wall_ms", "error",
)


@dataclass(frozen=True)
class ReportRow:
    """One experiment cell. `error` is non-empty when the cell failed, in
    which case the RMSE fields hold NaN."""

    model: str
    interval: str
    regime: str
    features: str
    seed: int
    train_rmse: float
    test_rmse: float
    wall_ms: float
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple[ReportRow, ...]

    @property
    def ok_rows(self) -> tuple[ReportRow, ...]:
        return tuple(r for r in self.rows if r.ok)

    @property
    def all_failed(self) -> bool:
        return bool(self.rows) and not self.ok_rows

    def select(self, **fields) -> tuple[ReportRow, ...]:
        return tuple(
            r for r in self.rows if all(getattr(r, k) == v for k, v in fields.items())
        )


@dataclass(frozen=True)
class ForgetGateRow:
    window: int
    seed: int
    mean_forget: float


@dataclass(frozen=True)
class ForgetGateReport:
    rows: tuple[ForgetGateRow, ...]

    def means_by_window(self, seed: int) -> list[tuple[int, float]]:
        return sorted((r.window, r.mean_forget) for r in self.rows if r.seed == seed)


def _fmt(value: float) -> str:
    return "" if math.isnan(value) else repr(float(value))


def report_to_csv(report: ExperimentReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in report.rows:
        writer.writerow(
            [r.model, r.interval, r.regime, r.features, r.seed,
             _fmt(r.train_rmse), _fmt(r.test_rmse), _fmt(r.wall_ms), r.error]
        )
    return out.getvalue()


def report_to_json(report: ExperimentReport) -> str:
    rows = []
    for r in report.rows:
        rows.append(
            {
                "model": r.model,
                "interval": r.interval,
                "regime": r.regime,
                "features": r.features,
                "seed": r.seed,
                "train_rmse": None if math.isnan(r.train_rmse) else r.train_rmse,
                "test_rmse": None if math.isnan(r.test_rmse) else r.test_rmse,
                "wall_ms": None if math.isnan(r.wall_ms) else r.wall_ms,
                "error": r.error,
            }
        )
    return json.dumps({"schema_version": REPORT_SCHEMA_VERSION, "rows": rows}, indent=1) + "\n"


def report_from_json(text: str) -> ExperimentReport:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"unreadable report: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise DataError("report schema mismatch")
    rows = []
    try:
        for raw in doc["rows"]:
            rows.append(
                ReportRow(
                    model=raw["model"],
                    interval=raw["interval"],
                    regime=raw["regime"],
                    features=raw["features"],
                    seed=int(raw["seed"]),
                    train_rmse=float("nan") if raw["train_rmse"] is None else float(raw["train_rmse"]),
                    test_rmse=float("nan") if raw["test_rmse"] is None else float(raw["test_rmse"]),
                    wall_ms=float("nan") if raw["wall_ms"] is None else float(raw["wall_ms"]),
                    error=raw.get("error", ""),
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"report schema mismatch: {exc!r}") from None
    return ExperimentReport(rows=tuple(rows))


def forget_report_to_csv(report: ForgetGateReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("window_size", "seed", "mean_forget"))
    for r in report.rows:
        writer.writerow((r.window, r.seed, repr(float(r.mean_forget))))
    return out.getvalue()


@dataclass(frozen=True)
class AggregateRow:
    model: str
    interval: str
    regime: str
    features: str
    count: int
    train_rmse_mean: float
    train_rmse_std: float
    test_rmse_mean: float
    test_rmse_std: float


def aggregate_report(reports) -> tuple[AggregateRow, ...]:
    """Group successful rows by (model, interval, regime, features) and
    report mean and population standard deviation over seed replicates.
    Rows are ordered by group key.
    """
    groups: dict[tuple[str, str, str, str], list[ReportRow]] = {}
    for report in reports:
        if not isinstance(report, ExperimentReport):
            raise DataError(f"cannot aggregate {type(report).__name__}")
        for r in report.ok_rows:
            groups.setdefault((r.model, r.interval, r.regime, r.features), []).append(r)
    out = []
    for key in sorted(groups):
        rows = groups[key]
        train = np.array([r.train_rmse for r in rows])
        test = np.array([r.test_rmse for r in rows])
        out.append(
            AggregateRow(
                model=key[0], interval=key[1], regime=key[2], features=key[3],
                count=len(rows),
                train_rmse_mean=float(train.mean()),
                train_rmse_std=float(train.std()),
                test_rmse_mean=float(test.mean()),
                test_rmse_std=float(test.std()),
            )
        )
    return tuple(out)


def aggregate_to_csv(rows: tuple[AggregateRow, ...]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ("model", "interval", "regime", "features", "count",
         "train_rmse_mean", "train_rmse_std", "test_rmse_mean", "test_rmse_std")
    )
    for r in rows:
        writer.writerow(
            (r.model, r.interval, r.regime, r.features, r.count,
             repr(r.train_rmse_mean), repr(r.train_rmse_std),
             repr(r.test_rmse_mean), repr(r.test_rmse_std))
        )
    return out.getvalue()


def summary_table(report: ExperimentReport) -> str:
    """Human-readable fixed-width table for terminal output."""
    headers = ("model", "interval", "regime", "features", "seed", "train_rmse", "test_rmse", "status")
    body = []
    for r in report.rows:
        body.append(
            (r.model, r.interval, r.regime, r.features, str(r.seed),
             "-" if math.isnan(r.train_rmse) else f"{r.train_rmse:.4f}",
             "-" if math.isnan(r.test_rmse) else f"{r.test_rmse:.4f}",
             r.error or "ok")
        )
    widths = [max(len(h), *(len(row[k]) for row in body)) if body else len(h) for k, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(widths[k]) for k, h in enumerate(headers))]
    for row in body:
        lines.append("  ".join(cell.ljust(widths[k]) for k, cell in enumerate(row)))
    return "\n".join(lines)
