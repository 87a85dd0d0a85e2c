"""Regression forest for the large scale plus local ordinary kriging of its
residuals under a separable exponential space-time covariance."""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import _cart
from .data import Dataset, ModelSpec, Rows, design_rows, distance_matrix
from .errors import EmptyInput, MissingTargetCovariate, NoNeighbors
from .kernels import SeparableCorrParams
from .simulate import stream_rng
from .variogram import VariogramGrid, empirical_variogram, fit_separable

FOREST_STREAM = 7
N_NEIGHBORS = 100


@dataclass
class ForestConfig:
    n_tree: int = 500
    mtry: int | None = None
    min_leaf: int = 5
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_tree < 1:
            raise ValueError("n_tree must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")

    def resolve_mtry(self, p: int) -> int:
        m = math.ceil(p / 3) if self.mtry is None else int(self.mtry)
        if not 1 <= m <= p:
            raise ValueError(f"mtry must be in [1, {p}], got {m}")
        return m

    def to_dict(self) -> dict:
        return {"n_tree": self.n_tree, "mtry": self.mtry, "min_leaf": self.min_leaf,
                "bootstrap": self.bootstrap, "seed": self.seed}


@dataclass
class RegressionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    oob_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, X) -> np.ndarray:
        return _cart.predict_tree(self.feature, self.threshold, self.left, self.right, self.value,
                                  np.ascontiguousarray(X, dtype=float))

    def apply(self, X) -> np.ndarray:
        return _cart.apply_tree(self.feature, self.threshold, self.left, self.right,
                                np.ascontiguousarray(X, dtype=float))

    def same_as(self, other: "RegressionTree") -> bool:
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("feature", "threshold", "left", "right", "value"))


def _tree_sample(cfg: ForestConfig, j: int, n: int, p: int):
    rng = stream_rng(cfg.seed, FOREST_STREAM, j)
    if cfg.bootstrap:
        rows = np.sort(rng.integers(0, n, size=n)).astype(np.int64)
    else:
        rows = np.arange(n, dtype=np.int64)
    keys = rng.random((max(2 * n, 1), p))
    return rows, keys


def fit_tree(X, y, cfg: ForestConfig, rows=None, keys=None, rng=None) -> RegressionTree:
    """One CART tree.  ``rows`` selects (with repetition) the training rows;
    ``keys`` holds one uniform row per node id for candidate-column draws."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if X.ndim != 2 or len(y) != X.shape[0] or len(y) == 0:
        raise EmptyInput("X and y must be non-empty with matching rows")
    n, p = X.shape
    if rows is None:
        rows = np.arange(n, dtype=np.int64)
    if keys is None:
        rng = rng or np.random.default_rng(0)
        keys = rng.random((max(2 * len(rows), 1), p))
    mtry = cfg.resolve_mtry(p)
    f, t, l, r, v = _cart.grow_tree(X, y, np.asarray(rows, dtype=np.int64), keys, mtry, cfg.min_leaf)
    oob = np.setdiff1d(np.arange(n), rows) if len(rows) else np.arange(n)
    return RegressionTree(f, t, l, r, v, oob.astype(np.int64))


@dataclass
class Forest:
    trees: list
    config: ForestConfig
    feature_names: list
    n_train: int
    oob_prediction: np.ndarray | None = None
    oob_mse: float = float("nan")

    def predict_trees(self, X) -> np.ndarray:
        """``[n_tree, rows]`` matrix of individual tree predictions."""
        X = np.ascontiguousarray(X, dtype=float)
        return np.vstack([t.predict(X) for t in self.trees])

    def predict(self, X) -> np.ndarray:
        return self.predict_trees(X).mean(axis=0)

    def oob_sets(self) -> list:
        """Out-of-bag row indices per tree, regenerated from the seed when the
        forest was loaded from disk."""
        if all(len(t.oob_indices) or not self.config.bootstrap for t in self.trees):
            return [t.oob_indices for t in self.trees]
        out = []
        for j in range(len(self.trees)):
            rng = stream_rng(self.config.seed, FOREST_STREAM, j)
            rows = rng.integers(0, self.n_train, size=self.n_train)
            out.append(np.setdiff1d(np.arange(self.n_train), rows))
        return out

    def same_as(self, other: "Forest") -> bool:
        return len(self.trees) == len(other.trees) and all(a.same_as(b) for a, b in zip(self.trees, other.trees))

    # -- flat array serialisation -------------------------------------------
    def to_array(self) -> np.ndarray:
        """[n_tree, n_nodes_1..n_nodes_k, then per tree feature|threshold|left|right|value]."""
        counts = [t.n_nodes for t in self.trees]
        parts = [np.array([len(self.trees)], dtype=float), np.array(counts, dtype=float)]
        for t in self.trees:
            parts += [t.feature.astype(float), t.threshold, t.left.astype(float), t.right.astype(float), t.value]
        return np.concatenate(parts)

    @classmethod
    def from_array(cls, a: np.ndarray, config: ForestConfig, feature_names, n_train: int) -> "Forest":
        k = int(a[0])
        counts = a[1:1 + k].astype(int)
        pos = 1 + k
        trees = []
        for c in counts:
            blk = a[pos:pos + 5 * c].reshape(5, c)
            pos += 5 * c
            trees.append(RegressionTree(blk[0].astype(np.int64), blk[1].copy(), blk[2].astype(np.int64),
                                        blk[3].astype(np.int64), blk[4].copy()))
        return cls(trees, config, list(feature_names), n_train)


def fit_forest(X, y, cfg: ForestConfig, feature_names=None, threads: int = 1) -> Forest:
    """Bagged trees on independent resamples; each tree draws from its own
    ``(seed, tree index)`` stream so thread count does not change the result."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if X.ndim != 2 or len(y) != X.shape[0]:
        raise EmptyInput("X and y must have matching rows")
    n, p = X.shape
    if n < 2 * cfg.min_leaf or n == 0:
        raise EmptyInput(f"need >= {2 * cfg.min_leaf} rows, got {n}")
    mtry = cfg.resolve_mtry(p)

    def grow(j):
        rows, keys = _tree_sample(cfg, j, n, p)
        f, t, l, r, v = _cart.grow_tree(X, y, rows, keys, mtry, cfg.min_leaf)
        oob = np.setdiff1d(np.arange(n), rows) if cfg.bootstrap else np.zeros(0, dtype=np.int64)
        return RegressionTree(f, t, l, r, v, oob.astype(np.int64))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            trees = list(ex.map(grow, range(cfg.n_tree)))
    else:
        trees = [grow(j) for j in range(cfg.n_tree)]
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(p)]
    forest = Forest(trees, cfg, names, n)
    if cfg.bootstrap:
        forest.oob_prediction, forest.oob_mse = oob_predict(forest, X, y)
    return forest


def oob_predict(forest: Forest, X, y, permute: int | None = None, rng=None):
    """Out-of-bag prediction per row (NaN if a row is never out of bag) and its
    MSE.  With ``permute = j``, column j is shuffled within each tree's OOB rows."""
    n = X.shape[0]
    total = np.zeros(n)
    count = np.zeros(n)
    for t, oob in zip(forest.trees, forest.oob_sets()):
        if len(oob) == 0:
            continue
        Xo = np.array(X[oob], dtype=float)
        if permute is not None:
            Xo[:, permute] = Xo[rng.permutation(len(oob)), permute]
        total[oob] += t.predict(Xo)
        count[oob] += 1
    with np.errstate(invalid="ignore"):
        pred = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    ok = count > 0
    mse = float(np.mean((y[ok] - pred[ok]) ** 2)) if ok.any() else float("nan")
    return pred, mse


# ---------------------------------------------------------------------------
# Residual kriging
# ---------------------------------------------------------------------------

@dataclass
class KrigingResult:
    value: np.ndarray
    weight_sums: np.ndarray
    no_neighbors: np.ndarray


def ok_weights(C: np.ndarray, c0: np.ndarray) -> np.ndarray:
    """Ordinary-kriging weights from the bordered system [[C, 1], [1', 0]]."""
    m = len(c0)
    A = np.empty((m + 1, m + 1))
    A[:m, :m] = C
    A[:m, m] = 1.0
    A[m, :m] = 1.0
    A[m, m] = 0.0
    b = np.append(c0, 1.0)
    try:
        sol = scipy.linalg.solve(A, b, assume_a="sym", check_finite=False)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError):
        sol = np.linalg.lstsq(A, b, rcond=None)[0]
    return sol[:m]


def krige_residuals(res: np.ndarray, latlon: np.ndarray, cov: SeparableCorrParams, targets_latlon,
                    targets_t, n_neighbors: int = N_NEIGHBORS) -> KrigingResult:
    """Local ordinary kriging of the residual panel ``res`` (stations x days,
    NaN where missing) at (location, day) targets."""
    res = np.asarray(res, dtype=float)
    targets_latlon = np.asarray(targets_latlon, dtype=float).reshape(-1, 2)
    targets_t = np.asarray(targets_t, dtype=float)
    si, ti = np.nonzero(np.isfinite(res))
    vals = res[si, ti]
    D_ss = distance_matrix(latlon)
    D_ts = distance_matrix(targets_latlon, latlon)
    m_all = len(vals)
    out = np.zeros(len(targets_t))
    wsum = np.zeros(len(targets_t))
    none = np.zeros(len(targets_t), dtype=bool)
    if m_all == 0:
        none[:] = True
        return KrigingResult(out, wsum, none)
    ts, tt = cov.theta_s, cov.theta_t
    for q in range(len(targets_t)):
        h = D_ts[q, si]
        u = np.abs(ti - targets_t[q])
        d = h / ts + u / tt
        k = min(n_neighbors, m_all)
        nb = np.argpartition(d, k - 1)[:k] if k < m_all else np.arange(m_all)
        nb = nb[np.lexsort((nb, d[nb]))]
        hs = D_ss[np.ix_(si[nb], si[nb])]
        us = np.abs(ti[nb][:, None] - ti[nb][None, :])
        C = cov.sill * np.exp(-hs / ts) * np.exp(-us / tt)
        C[np.diag_indices_from(C)] += cov.nugget
        c0 = cov.sill * np.exp(-h[nb] / ts) * np.exp(-u[nb] / tt)
        w = ok_weights(C, c0)
        out[q] = float(w @ vals[nb])
        wsum[q] = float(w.sum())
    return KrigingResult(out, wsum, none)


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

def forest_design(rows: Rows, spec: ModelSpec):
    """Same columns as the linear design, without the intercept."""
    X, labels = design_rows(rows, spec.covariates, spec.include_month_dummies)
    return X[:, 1:], labels[1:]


@dataclass
class RfstkConfig:
    forest: ForestConfig = field(default_factory=ForestConfig)
    n_bins: int = 12
    max_lag: int = 14
    n_neighbors: int = N_NEIGHBORS
    threads: int = 1
    residual_cov: SeparableCorrParams | None = None

    name = "rfstk"

    def fit(self, ds: Dataset, spec: ModelSpec) -> "RfstkFit":
        return fit_rfstk(ds, spec, self)


@dataclass
class RfstkFit:
    forest: Forest
    residual_cov: SeparableCorrParams
    train_residuals: np.ndarray
    spec: ModelSpec
    latlon: np.ndarray
    start_date: np.datetime64
    variogram: VariogramGrid | None = None
    n_neighbors: int = N_NEIGHBORS
    station_ids: list = field(default_factory=list)

    name = "rfstk"

    def _X(self, rows: Rows) -> np.ndarray:
        for c in self.spec.covariates:
            if c not in rows.covariates:
                raise MissingTargetCovariate(c)
        return forest_design(rows, self.spec)[0]

    def large_scale(self, rows: Rows) -> np.ndarray:
        return self.forest.predict(self._X(rows))

    def predict_large_scale(self, target: Dataset) -> np.ndarray:
        return self.large_scale(target.rows()).reshape(target.shape)

    def krige(self, latlon, t) -> KrigingResult:
        return krige_residuals(self.train_residuals, self.latlon, self.residual_cov, latlon, t, self.n_neighbors)

    def predict(self, target: Dataset) -> np.ndarray:
        ls = self.predict_large_scale(target)
        n, T = target.shape
        offset = int((target.dates[0] - self.start_date).astype(int))
        ll = np.repeat(target.latlon, T, axis=0)
        tt = np.tile(np.arange(T) + offset, n)
        kr = self.krige(ll, tt)
        if kr.no_neighbors.any():
            warnings.warn("no residual neighbours; kriging adjustment set to 0", RuntimeWarning)
        return ls + kr.value.reshape(n, T)

    def in_sample(self, train: Dataset):
        return self.predict_large_scale(train), self.predict(train)

    def importance(self, ds: Dataset, n_repeat: int = 1, seed: int = 0):
        from .interpret import permutation_importance
        rows = ds.rows(observed_only=True)
        return permutation_importance(self, self._X(rows), rows.y, n_repeat, seed)

    # -- persistence ----------------------------------------------------------
    def to_dict(self) -> dict:
        res = [[None if not np.isfinite(v) else float(v) for v in row] for row in self.train_residuals]
        return {
            "model": "rfstk",
            "spec": self.spec.to_dict(),
            "forest_config": self.forest.config.to_dict(),
            "feature_names": self.forest.feature_names,
            "n_train": self.forest.n_train,
            "oob_mse": self.forest.oob_mse,
            "residual_cov": self.residual_cov.to_dict(),
            "train_residuals": res,
            "station_ids": list(self.station_ids),
            "latlon": self.latlon.tolist(),
            "start_date": str(self.start_date),
            "n_neighbors": self.n_neighbors,
        }

    def save(self, directory) -> list:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        np.save(d / "forest.npy", self.forest.to_array(), allow_pickle=False)
        with open(d / "model.json", "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
        return [d / "model.json", d / "forest.npy"]

    @classmethod
    def from_dict(cls, d: dict, forest_array: np.ndarray) -> "RfstkFit":
        cfg = ForestConfig(**d["forest_config"])
        forest = Forest.from_array(forest_array, cfg, d["feature_names"], d["n_train"])
        forest.oob_mse = d.get("oob_mse", float("nan"))
        res = np.array([[np.nan if v is None else v for v in row] for row in d["train_residuals"]], dtype=float)
        return cls(forest, SeparableCorrParams(**d["residual_cov"]), res, ModelSpec.from_dict(d["spec"]),
                   np.asarray(d["latlon"], dtype=float).reshape(-1, 2), np.datetime64(d["start_date"], "D"),
                   None, d.get("n_neighbors", N_NEIGHBORS), d.get("station_ids", []))

    @classmethod
    def load(cls, directory) -> "RfstkFit":
        d = Path(directory)
        with open(d / "model.json") as fh:
            meta = json.load(fh)
        return cls.from_dict(meta, np.load(d / "forest.npy", allow_pickle=False))


def fit_rfstk(ds: Dataset, spec: ModelSpec, cfg: RfstkConfig | ForestConfig | None = None,
              vg_settings: dict | None = None, threads: int | None = None) -> RfstkFit:
    """Forest on the observed rows, then a separable variogram fit on the
    panel of training residuals (observed minus forest prediction)."""
    if cfg is None:
        cfg = RfstkConfig()
    elif isinstance(cfg, ForestConfig):
        cfg = RfstkConfig(forest=cfg)
    if vg_settings:
        cfg = RfstkConfig(**{**cfg.__dict__, **vg_settings})
    nthreads = cfg.threads if threads is None else threads
    spec.check(ds.covariate_names)
    rows = ds.rows(observed_only=True)
    X, names = forest_design(rows, spec)
    forest = fit_forest(X, rows.y, cfg.forest, names, nthreads)
    resid = np.full(ds.shape, np.nan)
    resid[rows.station, rows.day] = rows.y - forest.predict(X)
    vg = None
    if cfg.residual_cov is not None:
        cov = cfg.residual_cov
    else:
        vg = empirical_variogram(resid, ds.stations, cfg.n_bins, cfg.max_lag)
        cov = fit_separable(vg)
    return RfstkFit(forest, cov, resid, spec, ds.latlon, ds.dates[0], vg, cfg.n_neighbors, ds.station_ids)


def predict_rfstk(fit: RfstkFit, target: Dataset) -> np.ndarray:
    return fit.predict(target)


__all__ = ["ForestConfig", "RegressionTree", "Forest", "fit_tree", "fit_forest", "oob_predict", "ok_weights",
           "krige_residuals", "RfstkConfig", "RfstkFit", "fit_rfstk", "predict_rfstk", "NoNeighbors"]
