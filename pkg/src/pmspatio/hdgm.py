"""Hidden dynamic geostatistical model.

    z(s, t) = x(s, t)' beta + v xi(s, t) + eps(s, t)
    xi(., t) = g xi(., t-1) + eta(., t),   eta(., t) ~ N(0, Gamma(theta))

``Gamma`` is the unit-variance exponential correlation over great-circle
distances between the training stations.  The first day's state is drawn from
the stationary law N(0, Gamma / (1 - g^2)).  Estimation is by ECM: the E-step
is a Kalman filter / RTS smoother over the dense n-dimensional state, and the
M-step updates (beta, v, sigma2) jointly in closed form, then g (root of a
cubic), then theta (golden-section search).  Every conditional step increases
the expected complete-data log-likelihood, so the observed log-likelihood is
non-decreasing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.stats import norm

from . import _kf
from .data import Dataset, ModelSpec, Station, design_matrix, design_rows, distance_matrix, Rows
from .errors import AllMissing, MissingTargetCovariate, NotPositiveDefinite, TargetOutsideDateRange
from .kernels import DEFAULT_JITTER, cholesky, corr_from_distance, logdet_chol

LOG2PI = math.log(2.0 * math.pi)
THETA_BOUNDS = (0.01, 10.0)


@dataclass
class HdgmParams:
    """Parameters of the latent AR(1) geostatistical model."""

    beta: np.ndarray
    g: float
    theta: float
    v: float
    sigma2_eps: float

    def __post_init__(self):
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        self.g, self.theta, self.v, self.sigma2_eps = map(float, (self.g, self.theta, self.v, self.sigma2_eps))

    def validate(self, allow_zero_noise: bool = False) -> None:
        if not abs(self.g) < 1:
            raise ValueError("|g| must be < 1")
        if not self.theta > 0:
            raise ValueError("theta must be > 0")
        if self.v < 0:
            raise ValueError("v must be >= 0")
        if self.sigma2_eps < 0 or (self.sigma2_eps == 0 and not allow_zero_noise):
            raise ValueError("sigma2_eps must be > 0")

    def to_dict(self) -> dict:
        return {"beta": self.beta.tolist(), "g": self.g, "theta": self.theta,
                "v": self.v, "sigma2_eps": self.sigma2_eps}

    @classmethod
    def from_dict(cls, d) -> "HdgmParams":
        return cls(np.asarray(d["beta"], dtype=float), d["g"], d["theta"], d["v"], d["sigma2_eps"])


@dataclass
class SmoothedState:
    mean: np.ndarray          # [n, T]
    variance: np.ndarray      # [n, T] diagonals of the smoothed covariances
    sums: dict = field(default_factory=dict)   # second-moment sums used by the M-step
    proj_var: np.ndarray | None = None


@dataclass
class KalmanResult:
    loglik: float
    smoothed: SmoothedState


# ---------------------------------------------------------------------------
# Filter and smoother
# ---------------------------------------------------------------------------

def _kalman(resid: np.ndarray, Gam: np.ndarray, g: float, v: float, s2: float, smooth: bool = True,
            proj: np.ndarray | None = None):
    """Filter (and optionally smooth) the residual panel ``resid`` (NaN = missing).

    Returns ``(loglik, SmoothedState | None)``.  ``proj`` is an optional
    ``[n, m]`` matrix W; the smoother then also returns diag(W' P_t W) per day.
    """
    resid = np.ascontiguousarray(resid, dtype=float)
    obs = np.isfinite(resid)
    if not obs.any():
        raise AllMissing("no observed responses")
    ll, mf, Pf, Pp, bad = _kf.kalman_filter(resid, obs, np.ascontiguousarray(Gam, dtype=float),
                                            float(g), float(v), float(s2))
    if bad >= 0:
        raise NotPositiveDefinite(f"innovation covariance at t={bad}")
    if not smooth:
        return ll, None
    W = np.zeros((resid.shape[0], 0)) if proj is None else np.ascontiguousarray(proj, dtype=float)
    ms, var, pv, P1, A, B, C = _kf.rts_smoother(mf, Pf, Pp, float(g), W)
    sums = {"P1": P1, "A": A, "B": B, "C": C}
    return ll, SmoothedState(ms, np.maximum(var, 0.0), sums, None if proj is None else pv)


def _gamma(D: np.ndarray, theta: float, jitter: float) -> np.ndarray:
    return corr_from_distance(D, theta, jitter)


def _residual_panel(ds: Dataset, spec: ModelSpec, beta: np.ndarray):
    X, labels, _ = design_matrix(ds, spec)
    if X.shape[1] != len(beta):
        raise ValueError(f"beta has {len(beta)} entries, design has {X.shape[1]} columns")
    mu = (X @ beta).reshape(ds.shape)
    return ds.response - mu, X, labels


def kalman_loglik(ds: Dataset, spec: ModelSpec, p: HdgmParams, jitter: float = DEFAULT_JITTER) -> KalmanResult:
    """Exact Gaussian log-likelihood and fixed-interval smoothed state moments."""
    p.validate()
    resid, _, _ = _residual_panel(ds, spec, p.beta)
    Gam = _gamma(distance_matrix(ds.stations), p.theta, jitter)
    ll, sm = _kalman(resid, Gam, p.g, p.v, p.sigma2_eps)
    return KalmanResult(ll, sm)


def gls_beta(ds: Dataset, spec: ModelSpec, p: HdgmParams, jitter: float = DEFAULT_JITTER):
    """GLS estimate of beta and its covariance, conditional on (g, theta, v, sigma2).

    The response and every design column are passed through the same Kalman
    filter; the innovations whiten the model exactly.
    """
    X, labels, _ = design_matrix(ds, spec)
    n, T = ds.shape
    q = X.shape[1]
    Y = np.concatenate([ds.response.reshape(n, T, 1), X.reshape(n, T, q)], axis=2)
    obs = ds.observed
    Gam = _gamma(distance_matrix(ds.stations), p.theta, jitter)
    g, v, s2 = p.g, p.v, p.sigma2_eps
    M = np.zeros((q + 1, q + 1))
    m = np.zeros((n, q + 1))
    P = Gam / (1.0 - g * g)
    for t in range(T):
        if t > 0:
            m = g * m
            P = (g * g) * P + Gam
        idx = np.flatnonzero(obs[:, t])
        if len(idx) == 0:
            continue
        PO = P[:, idx]
        S = v * v * PO[idx]
        S[np.diag_indices(len(idx))] += s2
        L = cholesky(S)
        E = Y[idx, t, :] - v * m[idx]
        W = solve_triangular(L, v * PO.T, lower=True, check_finite=False)
        Aw = solve_triangular(L, E, lower=True, check_finite=False)
        M += Aw.T @ Aw
        m = m + W.T @ Aw
        P = P - W.T @ W
        P = 0.5 * (P + P.T)
    Mxx, Mxy = M[1:, 1:], M[1:, 0]
    # Columns that are zero on every observed row (e.g. a month with no data)
    # are unidentified: estimate 0, covariance NaN.
    live = np.diag(Mxx) > 0
    beta = np.zeros(q)
    cov = np.full((q, q), np.nan)
    sub = Mxx[np.ix_(live, live)]
    ci = np.linalg.inv(sub)
    cov[np.ix_(live, live)] = 0.5 * (ci + ci.T)
    beta[live] = np.linalg.solve(sub, Mxy[live])
    return beta, cov, labels


# ---------------------------------------------------------------------------
# EM
# ---------------------------------------------------------------------------

def _q_theta(theta: float, D: np.ndarray, M: np.ndarray, T: int, jitter: float) -> float:
    """theta-dependent part of the expected complete-data log-likelihood."""
    L = cholesky(_gamma(D, theta, jitter))
    Li = solve_triangular(L, np.eye(len(D)), lower=True, check_finite=False)
    return -0.5 * T * logdet_chol(L) - 0.5 * float(np.sum((Li @ M) * Li))


def _golden_max(f, lo: float, hi: float, tol: float = 1e-7, max_iter: int = 200):
    """Golden-section maximisation of a scalar function on [lo, hi]."""
    r = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - r * (b - a), a + r * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - r * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + r * (b - a)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def _state_q_g(g, n, a, cA, b, c):
    return 0.5 * n * np.log1p(-g * g) - 0.5 * ((1 - g * g) * a + cA - 2 * g * b + g * g * c)


def _update_g(Ginv_traces, n: int, g_old: float) -> float:
    """Maximise the state term over g for fixed Gamma.

    With a = tr(G^-1 P1), c_A = tr(G^-1 A), b = tr(G^-1 B), c = tr(G^-1 C) the
    stationarity condition is the cubic
        -(a - c) g^3 - b g^2 + (a - c - n) g + b = 0.
    """
    a, cA, b, c = Ginv_traces
    roots = np.roots([-(a - c), -b, a - c - n, b])
    cand = [float(r.real) for r in roots if abs(r.imag) < 1e-9 and abs(r.real) < 1.0]
    cand.append(g_old)
    vals = [_state_q_g(x, n, a, cA, b, c) for x in cand]
    return cand[int(np.argmax(vals))]


def _m_step(ds_obs, X3, y, obs, sm: SmoothedState, p: HdgmParams, D, T, jitter):
    n = obs.shape[0]
    # beta and v jointly: regress y on [X, xi] with expected cross-products.
    ms, pd_ = sm.mean[obs], sm.variance[obs]
    Xo = X3[obs]
    q = Xo.shape[1]
    G = np.empty((q + 1, q + 1))
    G[:q, :q] = ds_obs["XtX"]
    xm = Xo.T @ ms
    G[:q, q] = G[q, :q] = xm
    G[q, q] = ms @ ms + pd_.sum()
    rhs = np.concatenate([ds_obs["Xty"], [ms @ y]])
    # columns with no observed support stay at zero
    live = np.append(np.diag(G)[:q] > 0, True)
    sol = np.zeros(q + 1)
    Gl = G[np.ix_(live, live)]
    try:
        sol[live] = np.linalg.solve(Gl, rhs[live])
    except np.linalg.LinAlgError:
        sol[live] = np.linalg.lstsq(Gl, rhs[live], rcond=None)[0]
    beta, v = sol[:q], float(sol[q])
    r = y - Xo @ beta - v * ms
    s2 = float((r @ r + v * v * pd_.sum()) / len(y))
    s2 = max(s2, 1e-12)

    # g given the current theta, then theta given the new g.
    S = sm.sums
    L = cholesky(_gamma(D, p.theta, jitter))
    Li = solve_triangular(L, np.eye(n), lower=True, check_finite=False)
    Gi = Li.T @ Li
    traces = tuple(float(np.sum(Gi * S[k].T)) for k in ("P1", "A", "B", "C"))
    g = _update_g(traces, n, p.g)

    Mg = (1 - g * g) * S["P1"] + S["A"] - g * (S["B"] + S["B"].T) + g * g * S["C"]
    f = lambda lt: _q_theta(math.exp(lt), D, Mg, T, jitter)  # noqa: E731
    lt, fbest = _golden_max(f, math.log(THETA_BOUNDS[0]), math.log(THETA_BOUNDS[1]))
    theta = math.exp(lt) if fbest > f(math.log(p.theta)) else p.theta
    # v and -v give the same likelihood; report v >= 0.
    return HdgmParams(beta, g, theta, abs(v), s2)


def default_init(ds: Dataset, spec: ModelSpec) -> HdgmParams:
    """OLS beta, g = 0.5, theta = median pairwise distance, variance split evenly."""
    X, _, obs = design_matrix(ds, spec)
    y = ds.response.ravel()[obs]
    live = np.any(X[obs] != 0, axis=0)
    beta = np.zeros(X.shape[1])
    beta[live] = np.linalg.lstsq(X[obs][:, live], y, rcond=None)[0]
    r = y - X[obs] @ beta
    s2 = float(r @ r / max(len(y) - X.shape[1], 1))
    D = distance_matrix(ds.stations)
    off = D[np.triu_indices(ds.n, 1)]
    theta = float(np.median(off)) if off.size else 1.0
    theta = min(max(theta, THETA_BOUNDS[0]), THETA_BOUNDS[1])
    s2 = max(s2, 1e-6)
    return HdgmParams(beta, 0.5, theta, math.sqrt(0.5 * s2), 0.5 * s2)


@dataclass
class EmResult:
    params: HdgmParams
    loglik_trace: np.ndarray
    converged: bool
    n_iter: int


def em_fit(ds: Dataset, spec: ModelSpec, init: HdgmParams | None = None, tol: float = 1e-6,
           max_iter: int = 200, jitter: float = DEFAULT_JITTER) -> EmResult:
    """Maximum likelihood by ECM.  Stops when the relative log-likelihood change
    drops below ``tol``; on hitting ``max_iter`` returns the best parameters
    seen with ``converged=False`` and a RuntimeWarning."""
    if init is None:
        init = default_init(ds, spec)
    init.validate()
    X, _, obs_flat = design_matrix(ds, spec)
    n, T = ds.shape
    X3 = X.reshape(n, T, -1)
    obs = ds.observed
    if not obs.any():
        raise AllMissing("no observed responses")
    y = ds.response[obs]
    Xo = X3[obs]
    cache = {"XtX": Xo.T @ Xo, "Xty": Xo.T @ y}
    D = distance_matrix(ds.stations)

    p = init
    trace = []
    best = (-np.inf, p)
    converged = False
    it = 0
    while True:
        mu = (X @ p.beta).reshape(n, T)
        ll, sm = _kalman(ds.response - mu, _gamma(D, p.theta, jitter), p.g, p.v, p.sigma2_eps)
        trace.append(ll)
        if ll > best[0]:
            best = (ll, p)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol * abs(trace[-2]):
            converged = True
            break
        if it >= max_iter:
            break
        p = _m_step(cache, X3, y, obs, sm, p, D, T, jitter)
        it += 1
    if not converged:
        warnings.warn(f"EM stopped after {max_iter} iterations without converging", RuntimeWarning)
    return EmResult(best[1] if not converged else p, np.array(trace), converged, it)


# ---------------------------------------------------------------------------
# Fitted model and prediction
# ---------------------------------------------------------------------------

@dataclass
class HdgmConfig:
    tol: float = 1e-6
    max_iter: int = 200
    jitter: float = DEFAULT_JITTER

    name = "hdgm"

    def fit(self, ds: Dataset, spec: ModelSpec) -> "HdgmFit":
        res = em_fit(ds, spec, tol=self.tol, max_iter=self.max_iter, jitter=self.jitter)
        return HdgmFit.from_params(res.params, ds, spec, jitter=self.jitter, em=res)


@dataclass
class HdgmFit:
    params: HdgmParams
    train: Dataset
    spec: ModelSpec
    smoothed: SmoothedState
    loglik: float
    labels: list
    beta_se: np.ndarray | None = None
    jitter: float = DEFAULT_JITTER
    em: EmResult | None = None

    name = "hdgm"

    @classmethod
    def from_params(cls, params: HdgmParams, train: Dataset, spec: ModelSpec, jitter: float = DEFAULT_JITTER,
                    em: EmResult | None = None, with_se: bool = True) -> "HdgmFit":
        kr = kalman_loglik(train, spec, params, jitter)
        X, labels, _ = design_matrix(train, spec)
        se = None
        if with_se:
            _, cov, _ = gls_beta(train, spec, params, jitter)
            se = np.sqrt(np.maximum(np.diag(cov), 0.0))
        return cls(params, train, spec, kr.smoothed, kr.loglik, labels, se, jitter, em)

    # -- internals ----------------------------------------------------------
    def _gamma(self):
        return _gamma(distance_matrix(self.train.stations), self.params.theta, self.jitter)

    def _weights(self, latlon: np.ndarray):
        k = np.exp(-distance_matrix(self.train.latlon, latlon) / self.params.theta)   # [n, m]
        L = cholesky(self._gamma())
        w = cho_solve((L, True), k)
        return k, w

    def _day_index(self, dates) -> np.ndarray:
        dates = np.asarray(dates, dtype="datetime64[D]")
        idx = (dates - self.train.dates[0]).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.train.T):
            raise TargetOutsideDateRange("target day outside the training date range")
        return idx

    # -- public -------------------------------------------------------------
    def large_scale(self, rows: Rows) -> np.ndarray:
        X, _ = design_rows(rows, self.spec.covariates, self.spec.include_month_dummies)
        return X @ self.params.beta

    def predict_large_scale(self, target: Dataset) -> np.ndarray:
        self._check_target(target)
        return self.large_scale(target.rows()).reshape(target.shape)

    def _check_target(self, target: Dataset):
        for c in self.spec.covariates:
            if c not in target.covariates:
                raise MissingTargetCovariate(c)
        return self._day_index(target.dates)

    def predict(self, target: Dataset, return_var: bool = False):
        """Kriged prediction over every (station, day) cell of ``target``.

        The latent state at a new site is the simple-kriging projection of the
        smoothed state at the training stations on the same day; with the
        separable AR(1) x exponential covariance this equals the projection
        from the whole space-time record.
        """
        days = self._check_target(target)
        ls = self.predict_large_scale(target)
        k, w = self._weights(target.latlon)
        p = self.params
        xi = (w.T @ self.smoothed.mean)[:, days]
        mean = ls + p.v * xi
        if not return_var:
            return mean
        res = _residual_panel(self.train, self.spec, p.beta)[0]
        _, sm = _kalman(res, self._gamma(), p.g, p.v, p.sigma2_eps, proj=w)
        krig = np.maximum(1.0 - np.sum(k * w, axis=0), 0.0) / (1.0 - p.g**2)
        var_xi = krig[:, None] + sm.proj_var[:, days]
        return mean, p.v**2 * var_xi + p.sigma2_eps

    def predict_points(self, targets):
        """Predict at ``(Station, date, covariate dict)`` triples.

        Returns ``(mean, variance)`` arrays.
        """
        targets = list(targets)
        if not targets:
            return np.empty(0), np.empty(0)
        cols = {c: [] for c in self.spec.covariates}
        for _, _, cov in targets:
            for c in self.spec.covariates:
                if c not in cov:
                    raise MissingTargetCovariate(c)
                cols[c].append(float(cov[c]))
        days = self._day_index([d for _, d, _ in targets])
        latlon = np.array([[s.latitude, s.longitude] for s, _, _ in targets])
        rows = Rows(np.arange(len(targets)), days, self.train.months[days], latlon[:, 0], latlon[:, 1],
                    {c: np.asarray(v) for c, v in cols.items()}, np.full(len(targets), np.nan))
        ls = self.large_scale(rows)
        k, w = self._weights(latlon)
        p = self.params
        j = np.arange(len(targets))
        xi = np.sum(w * self.smoothed.mean[:, days], axis=0)
        res = _residual_panel(self.train, self.spec, p.beta)[0]
        _, sm = _kalman(res, self._gamma(), p.g, p.v, p.sigma2_eps, proj=w)
        krig = np.maximum(1.0 - np.sum(k * w, axis=0), 0.0) / (1.0 - p.g**2)
        return ls + p.v * xi, p.v**2 * (krig + sm.proj_var[j, days]) + p.sigma2_eps

    def in_sample(self, train: Dataset | None = None):
        """(large-scale, full-model) fitted panels on the training data."""
        ls = self.predict_large_scale(self.train)
        return ls, ls + self.params.v * self.smoothed.mean

    def coefficient_table(self):
        """Rows of (name, estimate, std.err, t, p) with GLS-conditional errors."""
        rows = []
        for name, b, se in zip(self.labels, self.params.beta, self.beta_se):
            if not np.isfinite(se) or se <= 0:
                rows.append((name, float(b), float("nan"), float("nan"), float("nan")))
                continue
            t = b / se
            rows.append((name, float(b), float(se), float(t), float(2 * norm.sf(abs(t)))))
        return rows

    def to_dict(self) -> dict:
        return {
            "model": "hdgm",
            "params": self.params.to_dict(),
            "spec": self.spec.to_dict(),
            "stations": [s.__dict__ for s in self.train.stations],
            "labels": list(self.labels),
            "beta_se": None if self.beta_se is None else [None if not np.isfinite(x) else float(x)
                                                          for x in self.beta_se],
            "beta_se_kind": "GLS-conditional",
            "loglik": self.loglik,
            "jitter": self.jitter,
            "loglik_trace": None if self.em is None else self.em.loglik_trace.tolist(),
            "converged": None if self.em is None else self.em.converged,
        }

    @classmethod
    def from_dict(cls, d: dict, train: Dataset) -> "HdgmFit":
        ids = [s["id"] for s in d["stations"]]
        train = train.select(ids)
        return cls.from_params(HdgmParams.from_dict(d["params"]), train, ModelSpec.from_dict(d["spec"]),
                               jitter=d.get("jitter", DEFAULT_JITTER))
