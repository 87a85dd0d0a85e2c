"""Empirical space-time semivariograms and separable exponential fits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .data import distance_matrix
from .errors import DegenerateGrid, EmptyField, NoConvergence
from .kernels import SeparableCorrParams

DEFAULT_N_BINS = 12
DEFAULT_MAX_LAG = 14
MAX_ITER = 500


@dataclass
class VariogramGrid:
    """Binned semivariances; rows are space bins, columns time lags 0..L.

    ``dist`` holds the mean pair distance of every cell (NaN when empty); it is
    what the model is evaluated at when fitting.
    """

    space_bin_edges: np.ndarray
    time_lags: np.ndarray
    gamma: np.ndarray
    counts: np.ndarray
    dist: np.ndarray = field(default=None)

    def __post_init__(self):
        self.space_bin_edges = np.asarray(self.space_bin_edges, dtype=float)
        self.time_lags = np.asarray(self.time_lags, dtype=int)
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.dist is None:
            self.dist = np.where(self.counts > 0, self.centers[:, None], np.nan) * np.ones_like(self.gamma)
        self.dist = np.asarray(self.dist, dtype=float)

    @property
    def centers(self) -> np.ndarray:
        e = self.space_bin_edges
        return 0.5 * (e[:-1] + e[1:])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["space_bin_center", "time_lag", "gamma", "count"])
            for b, c in enumerate(self.centers):
                for j, lag in enumerate(self.time_lags):
                    g = self.gamma[b, j]
                    w.writerow([f"{c:.6g}", int(lag), "NA" if not np.isfinite(g) else f"{g:.6g}",
                                int(self.counts[b, j])])


def default_space_bins(D: np.ndarray, n_bins: int = DEFAULT_N_BINS) -> np.ndarray:
    """Equal-width bins from 0 to half the largest pairwise distance."""
    top = 0.5 * float(np.max(D)) if D.size else 0.0
    if top <= 0:
        top = 1.0
    return np.linspace(0.0, top, n_bins + 1)


def _pair_sums(field_: np.ndarray, lag: int):
    """Per station pair (i, j): sum of squared differences z[i,t] - z[j,t+lag]
    over jointly observed t, and the pair count."""
    a = field_[:, : field_.shape[1] - lag]
    b = field_[:, lag:]
    ma, mb = np.isfinite(a), np.isfinite(b)
    a0, b0 = np.where(ma, a, 0.0), np.where(mb, b, 0.0)
    n = field_.shape[0]
    sq = np.empty((n, n))
    cnt = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        both = ma[i][None, :] & mb
        diff = a0[i][None, :] - b0
        sq[i] = np.sum(np.where(both, diff * diff, 0.0), axis=1)
        cnt[i] = both.sum(axis=1)
    return sq, cnt


def empirical_variogram(field_, stations, space_bins=None, max_time_lag: int = DEFAULT_MAX_LAG) -> VariogramGrid:
    """Method-of-moments semivariance over (distance bin, time lag) classes.

    ``space_bins`` is an array of bin edges, a bin count, or None for the
    default equal-width bins.

    Pairs at lag 0 are counted once (i < j); at lag > 0 every ordered station
    pair, including a station with itself, contributes.  Pairs farther apart
    than the last bin edge are ignored.
    """
    field_ = np.asarray(field_, dtype=float)
    if np.count_nonzero(np.isfinite(field_)) < 2:
        raise EmptyField("need at least two observed values")
    D = distance_matrix(stations)
    if space_bins is None or isinstance(space_bins, (int, np.integer)):
        edges = default_space_bins(D, DEFAULT_N_BINS if space_bins is None else int(space_bins))
    else:
        edges = np.asarray(space_bins, dtype=float)
    nb = len(edges) - 1
    L = min(int(max_time_lag), field_.shape[1] - 1)
    bin_of = np.searchsorted(edges, D, side="right") - 1
    bin_of[D == edges[-1]] = nb - 1
    valid_bin = (bin_of >= 0) & (bin_of < nb)

    sums = np.zeros((nb, L + 1))
    counts = np.zeros((nb, L + 1), dtype=np.int64)
    dsum = np.zeros((nb, L + 1))
    upper = np.triu(np.ones_like(D, dtype=bool), k=1)
    for lag in range(L + 1):
        sq, cnt = _pair_sums(field_, lag)
        use = valid_bin & (upper if lag == 0 else True)
        b = bin_of[use]
        np.add.at(sums[:, lag], b, sq[use])
        np.add.at(counts[:, lag], b, cnt[use])
        np.add.at(dsum[:, lag], b, cnt[use] * D[use])
    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.where(counts > 0, sums / (2.0 * counts), np.nan)
        dist = np.where(counts > 0, dsum / counts, np.nan)
    return VariogramGrid(edges, np.arange(L + 1), gamma, counts, dist)


def separable_model(h, u, p: SeparableCorrParams):
    """Semivariance of the separable exponential model; zero at the origin."""
    h = np.asarray(h, dtype=float)
    u = np.asarray(u, dtype=float)
    g = p.nugget + p.sill * (1.0 - np.exp(-h / p.theta_s) * np.exp(-u / p.theta_t))
    return np.where((h == 0) & (u == 0), 0.0, g)


@dataclass
class SeparableFit:
    params: SeparableCorrParams
    objective: float
    converged: bool
    trace: list


def _cells(vg: VariogramGrid):
    H = vg.dist
    U = np.broadcast_to(vg.time_lags[None, :].astype(float), vg.gamma.shape)
    use = (vg.counts > 0) & np.isfinite(vg.gamma) & np.isfinite(H)
    use &= ~((H == 0) & (U == 0))
    return H[use], U[use], vg.gamma[use], vg.counts[use].astype(float), use


def _unpack(x):
    # x = log(theta_s), log(theta_t), log(sill), log(nugget)
    return np.exp(np.clip(x, -700, 700))


def cressie_objective(x, h, u, gam, w):
    ts, tt, sill, nug = _unpack(x)
    model = nug + sill * (1.0 - np.exp(-h / ts - u / tt))
    model = np.maximum(model, 1e-300)
    return float(np.sum(w * (gam - model) ** 2 / model**2))


def fit_separable_full(vg: VariogramGrid, init: SeparableCorrParams) -> SeparableFit:
    """Cressie-weighted least-squares fit, returning the optimiser trace too."""
    h, u, gam, w, use = _cells(vg)
    lags_used = np.unique(u)
    space_used = np.unique(np.nonzero(use)[0])
    if len(gam) < 4 or len(lags_used) < 2 or len(space_used) < 2:
        raise DegenerateGrid("need >= 4 populated cells over >= 2 space bins and >= 2 lags")

    floor = 1e-12 * max(float(np.max(gam)), 1e-300)
    x0 = np.log([init.theta_s, init.theta_t, max(init.sill, floor), max(init.nugget, floor)])
    fun = lambda x: cressie_objective(x, h, u, gam, w)  # noqa: E731
    trace = [fun(x0)]
    res = scipy.optimize.minimize(
        fun, x0, method="Nelder-Mead", callback=lambda xk: trace.append(fun(xk)),
        options={"maxiter": MAX_ITER, "xatol": 1e-10, "fatol": 1e-16, "adaptive": True},
    )
    x, best = res.x, res.fun
    nm_ok = bool(res.success)

    # Cressie's criterion is a sum of squares in sqrt(w) * (gam / model - 1); a
    # trust-region polish from the simplex optimum sharpens the last digits.
    def resid(x):
        ts, tt, sill, nug = _unpack(x)
        model = np.maximum(nug + sill * (1.0 - np.exp(-h / ts - u / tt)), 1e-300)
        return np.sqrt(w) * (gam / model - 1.0)

    lsq = scipy.optimize.least_squares(resid, x, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                       max_nfev=MAX_ITER)
    if np.all(np.isfinite(lsq.x)) and fun(lsq.x) <= best:
        x, best = lsq.x, fun(lsq.x)
        trace.append(best)
    converged = nm_ok or bool(lsq.success)
    if not converged:
        raise NoConvergence(f"variogram fit did not converge within {MAX_ITER} iterations")
    ts, tt, sill, nug = _unpack(x)
    return SeparableFit(SeparableCorrParams(float(ts), float(tt), float(sill), float(nug)), best, converged, trace)


def fit_separable(vg: VariogramGrid, init: SeparableCorrParams | None = None) -> SeparableCorrParams:
    """Fit nugget + sill * (1 - exp(-h/theta_s) exp(-u/theta_t)) to ``vg``."""
    if init is None:
        init = default_init(vg)
    return fit_separable_full(vg, init).params


def default_init(vg: VariogramGrid) -> SeparableCorrParams:
    g = vg.gamma[np.isfinite(vg.gamma) & (vg.counts > 0)]
    top = float(np.max(g)) if g.size else 1.0
    low = float(np.min(g)) if g.size else 0.0
    edges = vg.space_bin_edges
    return SeparableCorrParams(
        theta_s=max(edges[-1] / 3.0, 1e-3),
        theta_t=max(len(vg.time_lags) / 4.0, 0.5),
        sill=max(top - low, 1e-6 * max(top, 1.0)),
        nugget=max(low, 1e-6 * max(top, 1.0)),
    )
