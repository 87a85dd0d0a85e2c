"""Partial dependence, permutation importance and coefficient tables."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import Dataset, Rows
from .errors import UnknownVariable
from .simulate import stream_rng

PDP_STREAM = 11
IMPORTANCE_STREAM = 13
HOT_MONTHS = (4, 5, 6, 7, 8, 9)


def _g(x) -> str:
    return "NA" if x is None or not np.isfinite(x) else f"{x:.6g}"


@dataclass
class PdpCurve:
    variable: str
    grid: np.ndarray
    mean_prediction: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["variable", "value", "mean_prediction"])
            for x, y in zip(self.grid, self.mean_prediction):
                w.writerow([self.variable, _g(x), _g(y)])


def pdp_rows(ds: Dataset, max_rows: int = 5000, seed: int = 0) -> Rows:
    """Observed training rows, subsampled (seeded, order kept) above ``max_rows``."""
    rows = ds.rows(observed_only=True)
    if len(rows) > max_rows:
        pick = np.sort(stream_rng(seed, PDP_STREAM).choice(len(rows), size=max_rows, replace=False))
        rows = rows.take(pick)
    return rows


def pdp(model, ds: Dataset, variable: str, grid_size: int = 50, max_rows: int = 5000, seed: int = 0) -> PdpCurve:
    """Average large-scale prediction with ``variable`` fixed at each value of
    an equidistant grid spanning its observed range.  Month dummies and the
    other covariates keep their observed values."""
    if variable not in model.spec.covariates:
        raise UnknownVariable(variable)
    full = ds.rows(observed_only=True)
    x = full.covariates[variable]
    grid = np.linspace(float(x.min()), float(x.max()), grid_size)
    rows = pdp_rows(ds, max_rows, seed)
    vals = np.array([float(np.mean(model.large_scale(rows.with_covariate(variable, v)))) for v in grid])
    return PdpCurve(variable, grid, vals)


@dataclass
class ImportanceTable:
    variables: list
    inc_mse: np.ndarray
    pct_inc_mse: np.ndarray
    baseline_mse: float
    n_repeat: int
    seed: int

    def rows(self):
        return list(zip(self.variables, self.inc_mse.tolist(), self.pct_inc_mse.tolist()))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["variable", "IncMSE", "pct_IncMSE"])
            for v, a, b in self.rows():
                w.writerow([v, _g(a), _g(b)])


def permutation_importance(fit, X, y, n_repeat: int = 1, seed: int = 0) -> ImportanceTable:
    """Increase in out-of-bag MSE when one column is permuted among each
    tree's out-of-bag rows, averaged over ``n_repeat`` permutations.

    ``fit`` is a Forest or anything with a ``forest`` attribute.  Both the
    absolute increase and the increase as a percentage of the baseline OOB
    MSE are reported; rows are sorted by decreasing IncMSE.
    """
    from .rfstk import oob_predict
    forest = getattr(fit, "forest", fit)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _, base = oob_predict(forest, X, y)
    p = X.shape[1]
    inc = np.zeros(p)
    for j in range(p):
        vals = []
        for r in range(n_repeat):
            rng = stream_rng(seed, IMPORTANCE_STREAM, j, r)
            vals.append(oob_predict(forest, X, y, permute=j, rng=rng)[1])
        inc[j] = float(np.mean(vals)) - base
    pct = 100.0 * inc / base if base > 0 else np.full(p, np.nan)
    order = np.argsort(-inc, kind="stable")
    names = list(forest.feature_names)
    return ImportanceTable([names[i] for i in order], inc[order], pct[order], base, n_repeat, seed)


@dataclass
class CoefficientReport:
    coefficients: list          # (name, estimate, se, t, p)
    edf: list                   # (name, edf)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["term", "estimate", "std_error", "t", "p_value", "edf"])
            for name, b, se, t, pv in self.coefficients:
                w.writerow([name, _g(b), _g(se), _g(t), _g(pv), "NA"])
            for name, e in self.edf:
                w.writerow([name, "NA", "NA", "NA", "NA", _g(e)])


def coefficient_report(fit) -> CoefficientReport:
    """Linear coefficients with standard errors, plus per-smooth edf where the
    model has smooths."""
    coefs = fit.coefficient_table()
    edf = fit.edf_table() if hasattr(fit, "edf_table") else []
    return CoefficientReport(coefs, edf)


def season_samples(ds: Dataset, variable: str, hot_months=HOT_MONTHS):
    """(x, y, season) triples of covariate and observed response for density
    overlays; ``season`` is "hot" for April-September, else "cold"."""
    rows = ds.rows(observed_only=True)
    if variable not in rows.covariates:
        raise UnknownVariable(variable)
    season = np.where(np.isin(rows.month, hot_months), "hot", "cold")
    return rows.covariates[variable], rows.y, season


def write_season_samples(ds: Dataset, variable: str, path) -> None:
    x, y, s = season_samples(ds, variable)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "season"])
        for a, b, c in zip(x, y, s):
            w.writerow([_g(a), _g(b), c])


__all__ = ["PdpCurve", "pdp", "pdp_rows", "ImportanceTable", "permutation_importance", "CoefficientReport",
           "coefficient_report", "season_samples", "write_season_samples"]
