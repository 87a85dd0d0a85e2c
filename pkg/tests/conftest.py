import warnings

import numpy as np
import pytest

from pmspatio.data import Dataset, ModelSpec, Station
from pmspatio.hdgm import HdgmParams
from pmspatio.simulate import SimConfig, simulate_hdgm, stream_rng, make_beta

XSPEC = ModelSpec(linear_terms=("x1", "x2", "x3"), include_month_dummies=True)
XEFFECTS = {"x1": 2.0, "x2": -1.5, "x3": 1.0}


def toy_dataset(response, covariates=None, start="2016-01-01", stations=None):
    """Dataset on a small grid of stations 0.5 deg apart."""
    response = np.asarray(response, dtype=float)
    n, T = response.shape
    if stations is None:
        stations = [Station(f"s{i}", 45.0 + 0.5 * (i % 3), 9.0 + 0.5 * (i // 3)) for i in range(n)]
    dates = np.datetime64(start, "D") + np.arange(T)
    return Dataset(tuple(stations), dates, response, covariates or {})


def sim(n=10, T=100, g=0.8, theta=1.0, v=3.0, s2=1.0, seed=0, spec=XSPEC, effects=XEFFECTS):
    p = HdgmParams(make_beta(spec, 40.0, effects), g, theta, v, s2)
    return simulate_hdgm(SimConfig(p, spec, T=T, n_stations=n, seed=seed))


@pytest.fixture
def rng():
    return stream_rng(12345, 0)


@pytest.fixture(autouse=True)
def _quiet_convergence():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*without converging")
        warnings.filterwarnings("ignore", message=".*did not converge")
        yield


def dense_loglik(ds, spec, p):
    """Joint Gaussian log-density of all observed cells under
    v^2 g^|t-t'| / (1 - g^2) exp(-d/theta) + sigma2 I."""
    from scipy.stats import multivariate_normal

    from pmspatio.data import design_matrix, distance_matrix

    X, _, _ = design_matrix(ds, spec)
    n, T = ds.shape
    R = np.exp(-distance_matrix(ds.stations) / p.theta)
    lag = np.abs(np.arange(T)[:, None] - np.arange(T)[None, :])
    K = p.v**2 * np.kron(R, p.g ** lag / (1.0 - p.g**2)) + p.sigma2_eps * np.eye(n * T)
    z = ds.response.ravel()
    ok = np.isfinite(z)
    mu = X @ p.beta
    return float(multivariate_normal(mu[ok], K[np.ix_(ok, ok)]).logpdf(z[ok]))


def random_params(rng, q):
    return HdgmParams(rng.normal(0, 2, q), rng.uniform(-0.95, 0.95), rng.uniform(0.1, 3.0),
                      rng.uniform(0.1, 3.0), rng.uniform(0.05, 2.0))


# acceptance lines, printed once at the end of the session
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
