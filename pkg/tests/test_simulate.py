import numpy as np
import pytest

from pmspatio.data import ModelSpec, design_matrix, distance_matrix
from pmspatio.hdgm import HdgmParams
from pmspatio.simulate import SimConfig, inject_missingness, simulate_hdgm, make_beta

from conftest import XEFFECTS, XSPEC, sim


def test_no_latent_no_noise_is_mean():
    res = sim(n=4, T=30, v=0.0, s2=0.0, seed=1)
    X, _, _ = design_matrix(res.dataset, XSPEC)
    assert np.array_equal(res.dataset.response.ravel(), X @ make_beta(XSPEC, 40.0, XEFFECTS))


def test_marginal_variance_identity():
    g, v, s2 = 0.6, 2.0, 1.5
    res = sim(n=20, T=1000, g=g, v=v, s2=s2, theta=0.5, seed=2)
    e = res.dataset.response - res.mean
    assert np.var(e) == pytest.approx(v**2 / (1 - g**2) + s2, rel=0.05)


def test_latent_lag1_correlation():
    res = sim(n=20, T=1000, g=0.7, seed=3)
    xi = res.latent
    r = np.sum(xi[:, 1:] * xi[:, :-1]) / np.sqrt(np.sum(xi[:, 1:] ** 2) * np.sum(xi[:, :-1] ** 2))
    assert r == pytest.approx(0.7, abs=0.03)


def test_innovation_spatial_correlation():
    theta = 0.8
    res = sim(n=12, T=3000, g=0.0, theta=theta, seed=4)
    eta = res.latent
    C = np.corrcoef(eta)
    R = np.exp(-distance_matrix(res.dataset.stations) / theta)
    assert np.max(np.abs(C - R)) < 0.1


def test_missingness_counts_and_blocks():
    ds = sim(n=10, T=100, seed=5).dataset
    assert inject_missingness(ds, 0.0) is ds
    m = inject_missingness(ds, 0.4, seed=1)
    assert (~m.observed).sum() == 400
    b = inject_missingness(ds, 0.2, pattern="block", block_length=5, seed=2)
    miss = ~b.observed
    assert miss.sum() == 200
    for row in miss:
        runs = np.diff(np.flatnonzero(np.diff(np.r_[0, row.astype(int), 0])))[::2]
        assert np.all(runs == 5)


def test_determinism():
    a, b = sim(n=5, T=40, seed=9), sim(n=5, T=40, seed=9)
    assert a.dataset.equals(b.dataset)
    assert not a.dataset.equals(sim(n=5, T=40, seed=10).dataset)
    m1 = inject_missingness(a.dataset, 0.3, seed=4)
    m2 = inject_missingness(b.dataset, 0.3, seed=4)
    assert np.array_equal(m1.observed, m2.observed)


def test_beta_length_checked():
    with pytest.raises(ValueError):
        simulate_hdgm(SimConfig(HdgmParams([1.0, 2.0], 0.5, 1.0, 1.0, 1.0), XSPEC, T=10, n_stations=3))


def test_covariate_scaling_moments():
    spec = ModelSpec(linear_terms=("WE_temp_2m",), include_month_dummies=False)
    cfg = SimConfig(HdgmParams([10.0, 0.0], 0.5, 1.0, 1.0, 1.0), spec, T=2000, n_stations=5, seed=3,
                    scale_to_moments=True)
    x = simulate_hdgm(cfg).dataset.covariates["WE_temp_2m"]
    assert x.mean() == pytest.approx(12.916, abs=0.3)
    assert x.std() == pytest.approx(8.233, rel=0.05)
