"""Additive model with an exponential spatial smooth and AR(1) errors.

Large scale: intercept, month dummies and linear terms, plus one natural cubic
regression spline per smooth term (sum-to-zero constrained).  Small scale: a
low-rank spatial surface C(s) = sum_k u_k exp(-d(s, knot_k) / theta) with ridge
penalty u' Omega u, and an AR(1) coefficient g estimated by Cochrane-Orcutt
iteration on quasi-differenced station series.  Smoothing parameters are
selected by GCV with coordinate descent over a log-spaced grid.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.stats import norm

from .data import Dataset, ModelSpec, Rows, design_rows, distance_matrix
from .errors import MissingTargetCovariate, NoConvergence, RankDeficientDesign, TooFewDistinctValues

LAMBDA_GRID = 10.0 ** np.arange(-6.0, 8.5, 0.5)


# ---------------------------------------------------------------------------
# Cubic regression spline
# ---------------------------------------------------------------------------

def _ncs_matrices(knots: np.ndarray):
    """F maps knot values to second derivatives at the knots; S is the
    integrated squared second-derivative penalty."""
    h = np.diff(knots)
    K = len(knots)
    D = np.zeros((K - 2, K))
    B = np.zeros((K - 2, K - 2))
    for i in range(K - 2):
        D[i, i] = 1.0 / h[i]
        D[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
        D[i, i + 2] = 1.0 / h[i + 1]
        B[i, i] = (h[i] + h[i + 1]) / 3.0
        if i < K - 3:
            B[i, i + 1] = B[i + 1, i] = h[i + 1] / 6.0
    BinvD = np.linalg.solve(B, D)
    F = np.vstack([np.zeros(K), BinvD, np.zeros(K)])
    S = D.T @ BinvD
    return F, 0.5 * (S + S.T)


@dataclass
class SplineBasis:
    """Natural cubic regression spline parameterised by its values at the knots."""

    covariate: str
    knots: np.ndarray
    penalty: np.ndarray
    F: np.ndarray = field(repr=False, default=None)
    Z: np.ndarray | None = field(repr=False, default=None)

    def __post_init__(self):
        if self.F is None:
            self.F, _ = _ncs_matrices(self.knots)

    def raw(self, x) -> np.ndarray:
        """Unconstrained ``[len(x), K]`` basis; linear beyond the boundary knots."""
        x = np.asarray(x, dtype=float)
        k = self.knots
        K = len(k)
        out = np.zeros((len(x), K))
        j = np.clip(np.searchsorted(k, x, side="right") - 1, 0, K - 2)
        h = k[j + 1] - k[j]
        inside = (x >= k[0]) & (x <= k[-1])
        r = np.arange(len(x))
        am = (k[j + 1] - x) / h
        ap = (x - k[j]) / h
        cm = ((k[j + 1] - x) ** 3 / h - h * (k[j + 1] - x)) / 6.0
        cp = ((x - k[j]) ** 3 / h - h * (x - k[j])) / 6.0
        ri = r[inside]
        ji = j[inside]
        out[ri, ji] += am[inside]
        out[ri, ji + 1] += ap[inside]
        out[ri] += cm[inside, None] * self.F[ji] + cp[inside, None] * self.F[ji + 1]

        h0, h1 = k[1] - k[0], k[-1] - k[-2]
        lo, hi = x < k[0], x > k[-1]
        if lo.any():
            # f(k0) + f'(k0) (x - k0);  f'(k0) = (b1 - b0)/h0 - h0 d1 / 6
            slope = np.zeros(K)
            slope[0], slope[1] = -1.0 / h0, 1.0 / h0
            slope = slope - h0 / 6.0 * self.F[1]
            base = np.zeros(K)
            base[0] = 1.0
            out[lo] = base + (x[lo] - k[0])[:, None] * slope
        if hi.any():
            # f'(kK) = (bK - bK-1)/h1 + h1 d_{K-1} / 6
            slope = np.zeros(K)
            slope[-1], slope[-2] = 1.0 / h1, -1.0 / h1
            slope = slope + h1 / 6.0 * self.F[-2]
            base = np.zeros(K)
            base[-1] = 1.0
            out[hi] = base + (x[hi] - k[-1])[:, None] * slope
        return out

    def constrain(self, x) -> None:
        """Absorb the sum-to-zero constraint over the training values ``x``."""
        c = self.raw(x).sum(axis=0)
        Q, _ = np.linalg.qr(c.reshape(-1, 1), mode="complete")
        self.Z = Q[:, 1:]

    def design(self, x) -> np.ndarray:
        X = self.raw(x)
        return X if self.Z is None else X @ self.Z

    @property
    def constrained_penalty(self) -> np.ndarray:
        return self.penalty if self.Z is None else self.Z.T @ self.penalty @ self.Z

    def to_dict(self) -> dict:
        return {"covariate": self.covariate, "knots": self.knots.tolist(),
                "Z": None if self.Z is None else self.Z.tolist()}

    @classmethod
    def from_dict(cls, d) -> "SplineBasis":
        knots = np.asarray(d["knots"], dtype=float)
        F, S = _ncs_matrices(knots)
        Z = None if d.get("Z") is None else np.asarray(d["Z"], dtype=float)
        return cls(d["covariate"], knots, S, F, Z)


def cubic_basis(x, K: int = 10, covariate: str = "x"):
    """Knots at ``K`` quantiles of the distinct values of ``x``.

    Returns ``(SplineBasis, basis matrix)``.
    """
    x = np.asarray(x, dtype=float)
    if K < 3:
        raise ValueError("K must be >= 3")
    ux = np.unique(x)
    if len(ux) < K:
        raise TooFewDistinctValues(f"{covariate}: {len(ux)} distinct values < K = {K}")
    knots = np.quantile(ux, np.linspace(0.0, 1.0, K))
    if np.any(np.diff(knots) <= 0):
        raise TooFewDistinctValues(f"{covariate}: coincident knots")
    F, S = _ncs_matrices(knots)
    basis = SplineBasis(covariate, knots, S, F)
    return basis, basis.raw(x)


# ---------------------------------------------------------------------------
# Spatial smooth
# ---------------------------------------------------------------------------

def kammann_wand_theta(knots) -> float:
    """Default range: the largest distance between two knots."""
    D = distance_matrix(knots)
    return float(D.max()) if D.size > 1 else 1.0


def spatial_basis(stations, knots, theta: float | None = None):
    """``exp(-d(s_i, knot_k) / theta)`` and the knot correlation (ridge) matrix.

    Returns ``(basis, penalty, theta)``; ``theta`` defaults to the Kammann-Wand
    maximum-distance rule.
    """
    if len(knots) == 0:
        raise ValueError("need at least one knot")
    if theta is None:
        theta = kammann_wand_theta(knots)
    Zs = np.exp(-distance_matrix(stations, knots) / theta)
    Om = np.exp(-distance_matrix(knots) / theta)
    return Zs, Om, theta


# ---------------------------------------------------------------------------
# Penalised least squares
# ---------------------------------------------------------------------------

def _root(S: np.ndarray) -> np.ndarray:
    """E with E'E = S (rows for the non-null eigen-directions only)."""
    w, U = np.linalg.eigh(0.5 * (S + S.T))
    keep = w > w.max() * 1e-12 if w.max() > 0 else np.zeros_like(w, dtype=bool)
    return (np.sqrt(w[keep])[:, None] * U[:, keep].T)


@dataclass
class Blocks:
    """Column layout of the full design: [linear | smooth_1 .. smooth_m | spatial]."""

    slices: list            # one slice per penalised block
    roots: list             # penalty square roots, scaled
    n_cols: int
    n_linear: int


@dataclass
class PlsResult:
    coef: np.ndarray
    rss: float
    edf: np.ndarray          # per-coefficient
    gcv: float
    Ra: np.ndarray


def _qr_reduce(X: np.ndarray, y: np.ndarray):
    Q, R = np.linalg.qr(X, mode="reduced")
    f = Q.T @ y
    rss0 = max(float(y @ y - f @ f), 0.0)
    return R, f, rss0


def penalized_fit(R: np.ndarray, f: np.ndarray, rss0: float, N: int, blocks: Blocks, lam) -> PlsResult:
    """min ||y - X b||^2 + sum_j lam_j b_j' S_j b_j given the QR reduction of X."""
    P = R.shape[1]
    rows = [R]
    for sl, E, lj in zip(blocks.slices, blocks.roots, lam):
        blk = np.zeros((E.shape[0], P))
        blk[:, sl] = np.sqrt(lj) * E
        rows.append(blk)
    A = np.vstack(rows)
    Qa, Ra = np.linalg.qr(A, mode="reduced")
    if np.min(np.abs(np.diag(Ra))) <= 1e-10 * np.max(np.abs(np.diag(Ra))):
        raise RankDeficientDesign("penalised design is rank deficient")
    Q1 = Qa[:P]
    coef = scipy.linalg.solve_triangular(Ra, Q1.T @ f)
    r = f - R @ coef
    rss = float(r @ r) + rss0
    # influence matrix diag in coefficient space: F = (Ra'Ra)^-1 R'R
    Rinv = scipy.linalg.solve_triangular(Ra, np.eye(P))
    F = Rinv @ (Rinv.T @ (R.T @ R))
    edf = np.diag(F).copy()
    tot = float(edf.sum())
    gcv = N * rss / max(N - tot, 1e-12) ** 2
    return PlsResult(coef, rss, edf, gcv, Ra)


def quasi_difference(M: np.ndarray, prev: np.ndarray, g: float) -> np.ndarray:
    """Row t minus g times row t-1 within each station; rows with no observed
    predecessor are scaled by sqrt(1 - g^2)."""
    out = np.array(M, dtype=float, copy=True)
    has = prev >= 0
    out[has] = M[has] - g * M[prev[has]]
    if (~has).any():
        out[~has] = np.sqrt(1.0 - g * g) * M[~has]
    return out


def _prev_index(rows: Rows) -> np.ndarray:
    """Index of the same station's previous-day row (or -1)."""
    key = {(int(s), int(d)): i for i, (s, d) in enumerate(zip(rows.station, rows.day))}
    return np.array([key.get((int(s), int(d) - 1), -1) for s, d in zip(rows.station, rows.day)], dtype=np.int64)


def pooled_lag1(r: np.ndarray, prev: np.ndarray, scale: float = 0.0) -> float:
    """Pooled lag-1 correlation of residuals; 0 when they are round-off
    relative to ``scale``."""
    has = prev >= 0
    a, b = r[has], r[prev[has]]
    den = np.sqrt(float(a @ a) * float(b @ b))
    if den <= 1e-300 or not has.any() or np.sqrt(den / len(a)) <= 1e-10 * scale:
        return 0.0
    return float(np.clip((a @ b) / den, -0.99, 0.99))


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass
class GammConfig:
    k: int = 10
    theta: float | None = None
    theta_search: bool = False
    tol: float = 1e-4
    max_iter: int = 30
    fit_ar: bool = True
    use_own_lag: bool = False
    fixed_lambda: dict | float | None = None
    lambda_grid: np.ndarray = field(default_factory=lambda: LAMBDA_GRID.copy())
    sweeps: int = 2
    spatial: bool = True

    name = "gamm"

    def fit(self, ds: Dataset, spec: ModelSpec) -> "GammFit":
        return fit_gamm(ds, spec, config=self)


@dataclass
class GammFit:
    spec: ModelSpec
    linear_labels: list
    beta_linear: np.ndarray
    bases: list
    spline_coefs: list
    knots: np.ndarray               # spatial knot lat/lon
    spatial_coefs: np.ndarray
    lam: dict
    theta_gamm: float
    g_gamm: float
    edf: dict
    sigma2: float
    Vb: np.ndarray
    n_obs: int
    use_own_lag: bool = False
    deviance_trace: list = field(default_factory=list)
    gcv: float = float("nan")
    converged: bool = True

    name = "gamm"

    # -- evaluation -----------------------------------------------------------
    def _check(self, rows: Rows):
        for c in self.spec.covariates:
            if c not in rows.covariates:
                raise MissingTargetCovariate(c)

    def linear_part(self, rows: Rows) -> np.ndarray:
        X, _ = design_rows(rows, self.spec.linear_terms, self.spec.include_month_dummies)
        return X @ self.beta_linear

    def smooth_term(self, name: str, x) -> np.ndarray:
        j = [b.covariate for b in self.bases].index(name)
        return self.bases[j].design(x) @ self.spline_coefs[j]

    def spatial_effect(self, lat, lon) -> np.ndarray:
        if len(self.spatial_coefs) == 0:
            return np.zeros(len(lat))
        Zs = np.exp(-distance_matrix(np.column_stack([lat, lon]), self.knots) / self.theta_gamm)
        return Zs @ self.spatial_coefs

    def large_scale(self, rows: Rows) -> np.ndarray:
        """Covariate part: intercept, months, linear terms and smooths."""
        self._check(rows)
        out = self.linear_part(rows)
        for b, c in zip(self.bases, self.spline_coefs):
            out = out + b.design(rows.covariates[b.covariate]) @ c
        return out

    def predict_large_scale(self, target: Dataset) -> np.ndarray:
        return self.large_scale(target.rows()).reshape(target.shape)

    def predict(self, target: Dataset, use_own_lag: bool | None = None) -> np.ndarray:
        """S + C(s), plus g (z(t-1) - S(t-1) - C) where the target's own
        previous day is observed and own-lag prediction is enabled."""
        use = self.use_own_lag if use_own_lag is None else use_own_lag
        ll = target.latlon
        base = self.predict_large_scale(target) + self.spatial_effect(ll[:, 0], ll[:, 1])[:, None]
        if not use or self.g_gamm == 0.0:
            return base
        out = base.copy()
        prev_res = target.response[:, :-1] - base[:, :-1]
        ok = np.isfinite(prev_res)
        out[:, 1:] = np.where(ok, base[:, 1:] + self.g_gamm * np.where(ok, prev_res, 0.0), base[:, 1:])
        return out

    def in_sample(self, train: Dataset):
        """(large-scale, full-model) panels; the full model uses the own lag."""
        ls = self.predict_large_scale(train)
        return ls, self.predict(train, use_own_lag=True)

    def curve(self, name: str, grid) -> tuple:
        """(fitted, lower95, upper95) of one smooth on ``grid``."""
        j = [b.covariate for b in self.bases].index(name)
        B = self.bases[j].design(grid)
        sl = self._slices()[1 + j]
        V = self.Vb[sl, sl]
        fit = B @ self.spline_coefs[j]
        se = np.sqrt(np.maximum(np.sum((B @ V) * B, axis=1), 0.0))
        z = norm.ppf(0.975)
        return fit, fit - z * se, fit + z * se

    def _slices(self):
        out = [slice(0, len(self.beta_linear))]
        pos = len(self.beta_linear)
        for c in self.spline_coefs:
            out.append(slice(pos, pos + len(c)))
            pos += len(c)
        out.append(slice(pos, pos + len(self.spatial_coefs)))
        return out

    def coefficient_table(self):
        se = np.sqrt(np.maximum(np.diag(self.Vb)[: len(self.beta_linear)], 0.0))
        rows = []
        for name, b, s in zip(self.linear_labels, self.beta_linear, se):
            if not s > 0:       # column held at zero (no training rows)
                rows.append((name, float(b), float("nan"), float("nan"), float("nan")))
                continue
            t = b / s
            rows.append((name, float(b), float(s), float(t), float(2 * norm.sf(abs(t)))))
        return rows

    def edf_table(self):
        return [(k, float(v)) for k, v in self.edf.items()]

    def to_dict(self) -> dict:
        return {
            "model": "gamm",
            "spec": self.spec.to_dict(),
            "linear_labels": list(self.linear_labels),
            "beta_linear": self.beta_linear.tolist(),
            "bases": [b.to_dict() for b in self.bases],
            "spline_coefs": [c.tolist() for c in self.spline_coefs],
            "spatial_knots": self.knots.tolist(),
            "spatial_coefs": self.spatial_coefs.tolist(),
            "lambda": self.lam,
            "theta_gamm": self.theta_gamm,
            "g_gamm": self.g_gamm,
            "edf": self.edf,
            "sigma2": self.sigma2,
            "Vb": self.Vb.tolist(),
            "n_obs": self.n_obs,
            "use_own_lag": self.use_own_lag,
            "gcv": self.gcv,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GammFit":
        return cls(
            ModelSpec.from_dict(d["spec"]), d["linear_labels"], np.asarray(d["beta_linear"]),
            [SplineBasis.from_dict(b) for b in d["bases"]], [np.asarray(c) for c in d["spline_coefs"]],
            np.asarray(d["spatial_knots"], dtype=float).reshape(-1, 2), np.asarray(d["spatial_coefs"]),
            d["lambda"], d["theta_gamm"], d["g_gamm"], d["edf"], d["sigma2"], np.asarray(d["Vb"]),
            d["n_obs"], d.get("use_own_lag", False), gcv=d.get("gcv", float("nan")),
            converged=d.get("converged", True),
        )


def _build(rows: Rows, spec: ModelSpec, cfg: GammConfig, theta: float | None, knots_latlon):
    Xl, labels = design_rows(rows, spec.linear_terms, spec.include_month_dummies)
    # A month with no training rows gives an all-zero dummy; its coefficient
    # is unidentified and is held at zero.
    live = np.any(Xl != 0, axis=0)
    Xl = Xl[:, live]
    cols = [Xl]
    bases, roots, slices, names = [], [], [], []
    pos = Xl.shape[1]
    for name in spec.smooth_terms:
        x = rows.covariates[name]
        b, _ = cubic_basis(x, cfg.k, name)
        b.constrain(x)
        Xj = b.design(x)
        S = b.constrained_penalty
        scale = np.linalg.norm(Xj.T @ Xj) / max(np.linalg.norm(S), 1e-300)
        cols.append(Xj)
        bases.append(b)
        roots.append(_root(S * scale))
        slices.append(slice(pos, pos + Xj.shape[1]))
        names.append(name)
        pos += Xj.shape[1]
    th = None
    if cfg.spatial and knots_latlon is not None and len(knots_latlon) > 1:
        Zs, Om, th = spatial_basis(np.column_stack([rows.lat, rows.lon]), knots_latlon, theta)
        scale = np.linalg.norm(Zs.T @ Zs) / max(np.linalg.norm(Om), 1e-300)
        cols.append(Zs)
        roots.append(_root(Om * scale))
        slices.append(slice(pos, pos + Zs.shape[1]))
        names.append("s(Longitude,Latitude)")
        pos += Zs.shape[1]
    X = np.column_stack(cols)
    return X, labels, live, bases, Blocks(slices, roots, pos, Xl.shape[1]), names, th


def _select_lambda(R, f, rss0, N, blocks, lam, grid, sweeps):
    """Coordinate descent on GCV; the current value is always a candidate, so
    the criterion never increases."""
    lam = list(lam)
    best = penalized_fit(R, f, rss0, N, blocks, lam)
    history = [best.gcv]
    for _ in range(sweeps):
        for j in range(len(lam)):
            cands = sorted(set(grid.tolist()) | {lam[j]})
            scores = []
            for c in cands:
                trial = lam.copy()
                trial[j] = c
                scores.append(penalized_fit(R, f, rss0, N, blocks, trial))
            g = np.array([s.gcv for s in scores])
            ok = np.flatnonzero(g <= g.min() * (1 + 1e-10) + 1e-300)
            pick = ok[-1]                       # ties go to the smoother fit
            if scores[pick].gcv <= best.gcv:
                lam[j] = cands[pick]
                best = scores[pick]
            history.append(best.gcv)
    return lam, best, history


def fit_gamm(ds: Dataset, spec: ModelSpec, k: int | None = None, tol: float | None = None,
             max_iter: int | None = None, config: GammConfig | None = None) -> GammFit:
    cfg = config or GammConfig()
    if k is not None:
        cfg = GammConfig(**{**cfg.__dict__, "k": k})
    if tol is not None:
        cfg.tol = tol
    if max_iter is not None:
        cfg.max_iter = max_iter
    spec.check(ds.covariate_names)
    rows = ds.rows(observed_only=True)
    knots = ds.latlon
    if cfg.theta_search and cfg.spatial and cfg.theta is None:
        base = kammann_wand_theta(knots)
        fits = [_fit_once(rows, spec, cfg, base * m, knots) for m in (0.25, 0.5, 1.0, 2.0, 4.0)]
        return min(fits, key=lambda f: f.gcv)
    return _fit_once(rows, spec, cfg, cfg.theta, knots)


def _fit_once(rows: Rows, spec: ModelSpec, cfg: GammConfig, theta, knots) -> GammFit:
    X, labels, live, bases, blocks, names, th = _build(rows, spec, cfg, theta, knots)
    y = rows.y
    N, P = X.shape
    if N < P + 10:
        raise RankDeficientDesign(f"{N} observations for {P} coefficients")
    prev = _prev_index(rows)
    n_pen = len(blocks.slices)
    if cfg.fixed_lambda is None:
        lam = [1.0] * n_pen
    elif isinstance(cfg.fixed_lambda, dict):
        lam = [float(cfg.fixed_lambda.get(nm, 1.0)) for nm in names]
    else:
        lam = [float(cfg.fixed_lambda)] * n_pen

    g = 0.0
    dev_trace = []
    converged = False
    for it in range(cfg.max_iter):
        Xq = quasi_difference(X, prev, g)
        yq = quasi_difference(y[:, None], prev, g)[:, 0]
        R, f, rss0 = _qr_reduce(Xq, yq)
        if cfg.fixed_lambda is None and n_pen:
            lam, res, _ = _select_lambda(R, f, rss0, N, blocks, lam, cfg.lambda_grid, cfg.sweeps)
        else:
            res = penalized_fit(R, f, rss0, N, blocks, lam)
        dev_trace.append(res.rss)
        if not cfg.fit_ar:
            converged = True
            break
        g_new = pooled_lag1(y - X @ res.coef, prev, float(np.max(np.abs(y))))
        dg = abs(g_new - g)
        g = g_new
        if len(dev_trace) > 1:
            rel = abs(dev_trace[-1] - dev_trace[-2]) / max(dev_trace[-2], 1e-300)
            if dg < cfg.tol and rel < cfg.tol:
                converged = True
                break
    if not converged:
        warnings.warn("GAMM AR(1) iteration did not converge", RuntimeWarning)

    # Final fit at the converged g so every reported quantity is consistent.
    if cfg.fit_ar:
        Xq = quasi_difference(X, prev, g)
        yq = quasi_difference(y[:, None], prev, g)[:, 0]
        R, f, rss0 = _qr_reduce(Xq, yq)
        res = penalized_fit(R, f, rss0, N, blocks, lam)
    coef = res.coef
    edf_tot = float(res.edf.sum())
    sigma2 = res.rss / max(N - edf_tot, 1.0)
    Rinv = scipy.linalg.solve_triangular(res.Ra, np.eye(P))
    Vb = sigma2 * (Rinv @ Rinv.T)

    # Re-insert held-at-zero linear columns.
    nl = blocks.n_linear
    full = np.concatenate([np.flatnonzero(live), len(live) + np.arange(P - nl)])
    Pf = len(live) + P - nl
    coef_f = np.zeros(Pf)
    coef_f[full] = coef
    Vb_f = np.zeros((Pf, Pf))
    Vb_f[np.ix_(full, full)] = Vb
    edf_f = np.zeros(Pf)
    edf_f[full] = res.edf
    shift = len(live) - nl
    blocks.slices = [slice(sl.start + shift, sl.stop + shift) for sl in blocks.slices]
    coef, Vb, nl = coef_f, Vb_f, len(live)
    res.edf = edf_f

    spline_coefs, edf = [], {}
    for b, sl in zip(bases, blocks.slices):
        spline_coefs.append(coef[sl])
        edf[b.covariate] = float(res.edf[sl].sum())
    if th is not None:
        sl = blocks.slices[-1]
        spatial_coefs = coef[sl]
        edf["s(Longitude,Latitude)"] = float(res.edf[sl].sum())
    else:
        spatial_coefs = np.zeros(0)
        th = float("nan") if theta is None else theta
    return GammFit(
        spec=spec, linear_labels=labels, beta_linear=coef[:nl], bases=bases, spline_coefs=spline_coefs,
        knots=np.asarray(knots, dtype=float), spatial_coefs=spatial_coefs,
        lam=dict(zip(names, map(float, lam))), theta_gamm=float(th), g_gamm=float(g), edf=edf,
        sigma2=float(sigma2), Vb=Vb, n_obs=N, use_own_lag=cfg.use_own_lag, deviance_trace=dev_trace,
        gcv=float(res.gcv), converged=converged,
    )


def predict_gamm(fit: GammFit, target: Dataset, use_own_lag: bool | None = None) -> np.ndarray:
    return fit.predict(target, use_own_lag)


__all__ = ["SplineBasis", "cubic_basis", "spatial_basis", "kammann_wand_theta", "GammConfig", "GammFit",
           "fit_gamm", "predict_gamm", "penalized_fit", "quasi_difference", "NoConvergence"]
