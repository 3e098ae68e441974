"""Regression metrics and shade accuracy."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

MAPE_GUARD = 0.1  # degC; rows with |y| below this are excluded from MAPE


class UndefinedMetric(ValueError):
    """Raised for R^2 on constant actuals; the partial report is attached."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass
class MetricsReport:
    rmse: float
    r2: float | None
    mape: float | None
    mbe: float
    n: int
    mape_excluded: int = 0
    shade_accuracy: float | None = None

    def to_dict(self):
        return {"rmse": self.rmse, "r2": self.r2, "mape": self.mape, "mbe": self.mbe,
                "n": self.n, "shade_accuracy": self.shade_accuracy,
                "mape_excluded": self.mape_excluded}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def compute_metrics(y, yhat) -> MetricsReport:
    """RMSE, R^2, MAPE (%) and MBE (actual - predicted; positive = underprediction)."""
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.size} actuals vs {yhat.size} predictions")
    n = y.size
    if n < 1:
        raise ValueError("need at least one sample")
    err = y - yhat
    sse = float(np.sum(err ** 2))
    rmse = float(np.sqrt(sse / n))
    mbe = float(np.mean(err))
    ok = np.abs(y) >= MAPE_GUARD
    mape = float(100.0 * np.mean(np.abs(err[ok] / y[ok]))) if ok.any() else None
    report = MetricsReport(rmse, None, mape, mbe, n, int(n - ok.sum()))
    sst = float(np.sum((y - y.mean()) ** 2))
    if n < 2 or sst == 0.0:
        raise UndefinedMetric("R^2 undefined: actuals have zero variance", report)
    report.r2 = 1.0 - sse / sst
    return report


def shade_accuracy(pred, truth) -> float:
    pred = np.asarray(pred, dtype=bool).ravel()
    truth = np.asarray(truth, dtype=bool).ravel()
    if pred.shape != truth.shape:
        raise ValueError("length mismatch")
    if pred.size < 1:
        raise ValueError("need at least one instance")
    return 100.0 * float(np.mean(pred == truth))
