"""Synthetic panels drawn from the latent AR(1) geostatistical model.

Every random draw comes from a Philox stream keyed by ``(seed, stream id)``,
so a dataset, a CV fold or a tree can be regenerated on its own in any order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, ModelSpec, Station, STANDARD_COVARIATES, design_matrix
from .hdgm import HdgmParams
from .kernels import DEFAULT_JITTER, cholesky, corr_matrix

#: Reference moments (mean, sd) of the standard covariates, used to scale synthetic covariates.
COVARIATE_MOMENTS = {
    "Altitude": (171.458, 200.004),
    "WE_temp_2m": (12.916, 8.233),
    "WE_tot_precipitation": (0.003, 0.008),
    "WE_rh_mean": (74.433, 12.299),
    "WE_wind_speed_100m_mean": (2.550, 1.326),
    "WE_blh_layer_max": (1039.402, 556.877),
    "LI_pigs_v2": (115.215, 159.666),
    "LI_bovine_v2": (46.241, 47.463),
    "LA_hvi": (2.324, 0.804),
    "LA_lvi": (2.208, 0.560),
}

# Stream ids.
_PLACEMENT, _COVARIATES, _LATENT, _NOISE = 0, 1, 2, 3

DEFAULT_BBOX = ((44.8, 46.8), (8.6, 10.6))


def stream_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for the sub-stream ``stream`` of ``seed``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(s) for s in stream]])
    return np.random.Generator(np.random.Philox(ss))


def random_stations(n: int, seed: int, bbox=DEFAULT_BBOX, prefix: str = "S") -> list[Station]:
    rng = stream_rng(seed, _PLACEMENT)
    lat = rng.uniform(*bbox[0], size=n)
    lon = rng.uniform(*bbox[1], size=n)
    alt = rng.uniform(0.0, 1200.0, size=n)
    width = len(str(n))
    return [Station(f"{prefix}{i:0{width}d}", float(a), float(b), float(c))
            for i, (a, b, c) in enumerate(zip(lat, lon, alt))]


@dataclass
class SimConfig:
    params: HdgmParams
    spec: ModelSpec = field(default_factory=ModelSpec)
    T: int = 365
    stations: list[Station] | None = None
    n_stations: int = 20
    bbox: tuple = DEFAULT_BBOX
    covariate_generator: str = "iid-normal"
    source: Dataset | None = None
    scale_to_moments: bool = False
    start_date: str = "2016-01-01"
    seed: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")


@dataclass
class SimResult:
    dataset: Dataset
    latent: np.ndarray
    mean: np.ndarray


def _covariates(cfg: SimConfig, stations: list[Station], dates: np.ndarray) -> dict[str, np.ndarray]:
    n, T = len(stations), len(dates)
    names = list(dict.fromkeys(cfg.spec.covariates))
    if cfg.covariate_generator == "from-dataset":
        if cfg.source is None:
            raise ValueError("from-dataset generator needs a source Dataset")
        return {k: np.array(cfg.source.covariates[k][:n, :T]) for k in names}
    rng = stream_rng(cfg.seed, _COVARIATES)
    t = np.arange(T)
    out = {}
    for k in names:
        if k == "Altitude":
            out[k] = np.repeat([[s.altitude] for s in stations], T, axis=1)
            continue
        if cfg.covariate_generator == "iid-normal":
            m = rng.standard_normal((n, T))
        elif cfg.covariate_generator == "seasonal-sine":
            phase = rng.uniform(0, 2 * np.pi)
            m = np.sqrt(2) * np.sin(2 * np.pi * t / 365.25 + phase)[None, :] * 0.8
            m = m + 0.6 * rng.standard_normal((n, T))
        else:
            raise ValueError(f"unknown covariate generator {cfg.covariate_generator!r}")
        if cfg.scale_to_moments and k in COVARIATE_MOMENTS:
            mu, sd = COVARIATE_MOMENTS[k]
            m = mu + sd * m
        out[k] = m
    return out


def simulate_hdgm(cfg: SimConfig) -> SimResult:
    """Draw z = X beta + v xi + eps with xi a stationary spatial AR(1)."""
    p = cfg.params
    p.validate(allow_zero_noise=True)
    stations = list(cfg.stations) if cfg.stations is not None else random_stations(cfg.n_stations, cfg.seed, cfg.bbox)
    n, T = len(stations), cfg.T
    dates = np.datetime64(cfg.start_date, "D") + np.arange(T)
    covs = _covariates(cfg, stations, dates)
    ds0 = Dataset(tuple(stations), dates, np.zeros((n, T)), covs)
    X, _, _ = design_matrix(ds0, cfg.spec)
    if X.shape[1] != len(p.beta):
        raise ValueError(f"beta has {len(p.beta)} entries, design has {X.shape[1]} columns")
    mean = (X @ p.beta).reshape(n, T)

    L = cholesky(corr_matrix(stations, p.theta, DEFAULT_JITTER))
    rng = stream_rng(cfg.seed, _LATENT)
    eta = L @ rng.standard_normal((n, T))
    xi = np.empty((n, T))
    xi[:, 0] = eta[:, 0] / np.sqrt(1.0 - p.g**2)
    for t in range(1, T):
        xi[:, t] = p.g * xi[:, t - 1] + eta[:, t]
    eps = np.sqrt(p.sigma2_eps) * stream_rng(cfg.seed, _NOISE).standard_normal((n, T))
    z = mean + p.v * xi + eps
    return SimResult(Dataset(tuple(stations), dates, z, covs), xi, mean)


def inject_missingness(ds: Dataset, rate: float, pattern: str = "random", seed: int = 0,
                       block_length: int = 7) -> Dataset:
    """Mask ``round(rate * n * T)`` response cells.

    ``pattern="block"`` masks runs of exactly ``block_length`` consecutive days
    (separated by at least one day), so the count is rounded to a multiple of
    the run length.
    """
    if not 0 <= rate < 1:
        raise ValueError("rate must be in [0, 1)")
    n, T = ds.shape
    resp = np.array(ds.response)
    target = int(round(rate * n * T))
    if target == 0:
        return ds
    rng = stream_rng(seed, 99)
    if pattern == "random":
        cand = np.flatnonzero(np.isfinite(resp.ravel()))
        pick = rng.choice(cand, size=min(target, len(cand)), replace=False)
        resp.ravel()[pick] = np.nan
    elif pattern == "block":
        width = block_length + 1
        per = T // width
        if per == 0:
            raise ValueError("series too short for the block length")
        n_blocks = min(int(round(target / block_length)), n * per)
        slots = rng.choice(n * per, size=n_blocks, replace=False)
        for s in slots:
            i, k = divmod(int(s), per)
            resp[i, k * width: k * width + block_length] = np.nan
    else:
        raise ValueError(f"unknown pattern {pattern!r}")
    return ds.with_response(resp)


def make_beta(spec: ModelSpec, intercept: float = 40.0, effects: dict | None = None) -> np.ndarray:
    """Coefficient vector aligned with ``design_matrix`` columns of ``spec``."""
    effects = effects or {}
    k = 1 + (11 if spec.include_month_dummies else 0)
    beta = np.zeros(k + len(spec.covariates))
    beta[0] = intercept
    for j, name in enumerate(spec.covariates):
        beta[k + j] = effects.get(name, 0.0)
    return beta


__all__ = [
    "HdgmParams", "SimConfig", "SimResult", "simulate_hdgm", "inject_missingness",
    "stream_rng", "random_stations", "STANDARD_COVARIATES", "COVARIATE_MOMENTS", "make_beta",
]
