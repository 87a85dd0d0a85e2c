"""Prediction metrics, leave-one-station-out cross-validation and residual
diagnostics."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .data import Dataset, ModelSpec
from .errors import LengthMismatch
from .variogram import VariogramGrid, empirical_variogram

MA_WINDOW = 15


@dataclass(frozen=True)
class Metrics:
    mse: float
    rmse: float
    mae: float
    r2: float | None
    n: int

    def to_dict(self) -> dict:
        return {"mse": self.mse, "rmse": self.rmse, "mae": self.mae, "r2": self.r2, "n": self.n}


def metrics(obs, pred) -> Metrics:
    """MSE, RMSE, MAE and R^2 (None when obs has fewer than two distinct values).

    Pairs where either value is missing are dropped.
    """
    obs = np.asarray(obs, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if obs.shape != pred.shape:
        raise LengthMismatch(f"{obs.shape} vs {pred.shape}")
    ok = np.isfinite(obs) & np.isfinite(pred)
    o, p = obs[ok], pred[ok]
    if len(o) < 2:
        raise LengthMismatch("need at least two paired values")
    e = o - p
    mse = float(np.mean(e * e))
    sst = float(np.sum((o - o.mean()) ** 2))
    r2 = None if len(np.unique(o)) < 2 or sst == 0 else 1.0 - float(np.sum(e * e)) / sst
    return Metrics(mse, math.sqrt(mse), float(np.mean(np.abs(e))), r2, int(len(o)))


def adjusted_r2(r2: float | None, n: int, k: int) -> float | None:
    """1 - (1 - R^2)(n - 1)/(n - k - 1), with k large-scale regressors."""
    if r2 is None or n - k - 1 <= 0:
        return None
    return 1.0 - (1.0 - r2) * (n - 1) / (n - k - 1)


# ---------------------------------------------------------------------------
# Baseline
# ---------------------------------------------------------------------------

@dataclass
class BaselineFit:
    day_mean: np.ndarray
    start_date: np.datetime64

    name = "baseline-mean"

    def predict(self, target: Dataset) -> np.ndarray:
        off = int((target.dates[0] - self.start_date).astype(int))
        idx = np.clip(np.arange(target.T) + off, 0, len(self.day_mean) - 1)
        return np.tile(self.day_mean[idx], (target.n, 1))

    def predict_large_scale(self, target: Dataset) -> np.ndarray:
        return self.predict(target)

    def in_sample(self, train: Dataset):
        p = self.predict(train)
        return p, p

    def to_dict(self) -> dict:
        return {"model": "baseline-mean", "day_mean": self.day_mean.tolist(), "start_date": str(self.start_date)}


@dataclass
class BaselineConfig:
    """Predict the training stations' mean response of the same day."""

    name = "baseline-mean"

    def fit(self, ds: Dataset, spec: ModelSpec | None = None) -> BaselineFit:
        r = ds.response
        cnt = np.isfinite(r).sum(axis=0)
        tot = np.nansum(r, axis=0)
        overall = float(np.nanmean(r))
        day = np.where(cnt > 0, tot / np.maximum(cnt, 1), overall)
        return BaselineFit(day, ds.dates[0])


# ---------------------------------------------------------------------------
# LOSOCV
# ---------------------------------------------------------------------------

@dataclass
class FoldResult:
    station_id: str
    dates: np.ndarray
    observed: np.ndarray
    predicted: np.ndarray | None
    metrics: Metrics | None
    failed: bool = False
    error: str = ""

    @property
    def errors(self) -> np.ndarray:
        return self.observed - self.predicted

    def moving_average(self, window: int = MA_WINDOW) -> np.ndarray:
        """Centred moving average of the prediction error over calendar days;
        missing days are skipped inside the window."""
        e = pd.Series(self.errors)
        return e.rolling(window, center=True, min_periods=1).mean().to_numpy()


@dataclass
class CVReport:
    per_station: dict
    pooled: Metrics | None
    config: dict = field(default_factory=dict)

    @property
    def folds(self) -> list:
        return list(self.per_station.values())

    @property
    def failed(self) -> list:
        return [f.station_id for f in self.folds if f.failed]

    def pooled_series(self):
        ok = [f for f in self.folds if not f.failed]
        if not ok:
            return np.empty(0), np.empty(0)
        return np.concatenate([f.observed for f in ok]), np.concatenate([f.predicted for f in ok])

    def to_per_station_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["station_id", "date", "observed", "predicted", "error"])
            for f in self.folds:
                if f.failed:
                    continue
                for d, o, p in zip(f.dates, f.observed, f.predicted):
                    w.writerow([f.station_id, str(d), _g(o), _g(p), _g(o - p)])

    def to_summary_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["station_id", "mse", "rmse", "mae", "r2", "n", "status"])
            for f in self.folds:
                if f.failed:
                    w.writerow([f.station_id, "NA", "NA", "NA", "NA", 0, "failed: " + f.error])
                    continue
                m = f.metrics
                w.writerow([f.station_id, _g(m.mse), _g(m.rmse), _g(m.mae), _g(m.r2), m.n, "ok"])

    def to_moving_average_csv(self, path, window: int = MA_WINDOW) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["station_id", "date", "error_ma"])
            for f in self.folds:
                if f.failed:
                    continue
                for d, v in zip(f.dates, f.moving_average(window)):
                    w.writerow([f.station_id, str(d), _g(v)])

    def pooled_dict(self) -> dict:
        return {
            "pooled": None if self.pooled is None else self.pooled.to_dict(),
            "per_station": {k: (None if f.failed else f.metrics.to_dict()) for k, f in self.per_station.items()},
            "failed": {f.station_id: f.error for f in self.folds if f.failed},
            "config": self.config,
        }

    def to_pooled_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.pooled_dict(), fh, indent=1)


def _g(x) -> str:
    if x is None or not np.isfinite(x):
        return "NA"
    return f"{x:.6g}"


def _fold(ds: Dataset, model, spec, vid: str, exclude: set, reveal_target: bool) -> FoldResult:
    target = ds.select([vid])
    obs = np.array(target.response[0])
    train = ds.drop({vid} | exclude)
    try:
        fit = model.fit(train, spec)
        tgt = target if reveal_target else target.with_response(np.full(target.shape, np.nan))
        pred = np.asarray(fit.predict(tgt), dtype=float)[0]
        m = metrics(obs, pred)
    except Exception as exc:            # a failed fold is reported, not fatal
        return FoldResult(vid, target.dates, obs, None, None, True, f"{type(exc).__name__}: {exc}")
    return FoldResult(vid, target.dates, obs, pred, m)


def losocv(ds: Dataset, model, spec: ModelSpec | None = None, validate_ids=None, exclude_ids=(),
           threads: int = 1) -> CVReport:
    """Leave-one-station-out cross-validation.

    Each fold fits ``model`` (any object with ``fit(ds, spec)``) on every
    station except the held-out one and ``exclude_ids``, then predicts the
    held-out station's full series.  The held-out responses are hidden from
    prediction unless the model asks for its own lag (``use_own_lag``).
    Results are ordered by ``validate_ids`` whatever the execution order.
    """
    exclude = set(exclude_ids)
    for s in exclude:
        ds.index_of(s)
    if validate_ids is None:
        validate_ids = [s for s in ds.station_ids if s not in exclude]
    validate_ids = [v for v in validate_ids if v not in exclude]
    for v in validate_ids:
        ds.index_of(v)
    reveal = bool(getattr(model, "use_own_lag", False))
    job = lambda v: _fold(ds, model, spec, v, exclude, reveal)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(job, validate_ids))
    else:
        results = [job(v) for v in validate_ids]
    per = {r.station_id: r for r in results}
    rep = CVReport(per, None, {
        "model": getattr(model, "name", type(model).__name__),
        "validate_ids": list(validate_ids),
        "exclude_ids": sorted(exclude),
        "training_rule": "all stations except the held-out one and the exclusions",
        "own_lag": reveal,
    })
    o, p = rep.pooled_series()
    if len(o):
        try:
            rep.pooled = metrics(o, p)
        except LengthMismatch:
            rep.pooled = None
    return rep


# ---------------------------------------------------------------------------
# Residual diagnostics
# ---------------------------------------------------------------------------

def monthly_sd(residuals: np.ndarray, dates) -> np.ndarray:
    """Standard deviation of all residuals in each calendar month (NaN when a
    month has fewer than two)."""
    months = (np.asarray(dates, dtype="datetime64[M]").astype(int) % 12) + 1
    out = np.full(12, np.nan)
    for m in range(1, 13):
        v = residuals[:, months == m]
        v = v[np.isfinite(v)]
        if len(v) >= 2:
            out[m - 1] = float(np.std(v, ddof=1))
    return out


def acf(x, max_lag: int) -> np.ndarray | None:
    """Sample autocorrelation over non-missing aligned pairs; None when the
    series is constant or too short."""
    x = np.asarray(x, dtype=float)
    ok = np.isfinite(x)
    if ok.sum() < 2:
        return None
    xc = np.where(ok, x - x[ok].mean(), 0.0)
    den = float(xc @ xc)
    if den <= 0:
        return None
    L = min(max_lag, len(x) - 1)
    return np.array([float(xc[: len(x) - k] @ xc[k:]) / den for k in range(L + 1)])


@dataclass
class Diagnostics:
    monthly_sd: np.ndarray
    acf: dict
    residual_variogram: VariogramGrid | None

    def acf_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["station_id", "lag", "acf"])
            for sid, a in self.acf.items():
                if a is None:
                    continue
                for k, v in enumerate(a):
                    w.writerow([sid, k, _g(v)])

    def monthly_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["month", "sd"])
            for m, v in enumerate(self.monthly_sd, start=1):
                w.writerow([m, _g(v)])


def residual_diagnostics(residuals, stations, dates, max_lag: int = 14, variogram: bool = True) -> Diagnostics:
    residuals = np.asarray(residuals, dtype=float)
    ids = [getattr(s, "id", str(i)) for i, s in enumerate(stations)]
    acfs = {sid: acf(residuals[i], max_lag) for i, sid in enumerate(ids)}
    vg = None
    if variogram and np.count_nonzero(np.isfinite(residuals)) >= 2 and len(stations) >= 2:
        vg = empirical_variogram(residuals, stations, max_time_lag=max_lag)
    return Diagnostics(monthly_sd(residuals, dates), acfs, vg)


__all__ = ["Metrics", "metrics", "adjusted_r2", "BaselineConfig", "BaselineFit", "FoldResult", "CVReport",
           "losocv", "monthly_sd", "acf", "Diagnostics", "residual_diagnostics"]
