import json
import math

import numpy as np
import pytest

from pmspatio.data import ModelSpec, Station, design_matrix
from pmspatio.errors import AllMissing, MissingTargetCovariate, TargetOutsideDateRange
from pmspatio.evaluation import losocv
from pmspatio.hdgm import HdgmConfig, HdgmFit, HdgmParams, em_fit, gls_beta, kalman_loglik
from pmspatio.simulate import inject_missingness, stream_rng, make_beta

from conftest import XEFFECTS, XSPEC, dense_loglik, random_params, sim, toy_dataset

SPEC0 = ModelSpec(linear_terms=("x1",), include_month_dummies=False)


def _small(n, T, seed, missing=0.0):
    ds = sim(n=n, T=T, seed=seed, spec=SPEC0, effects={"x1": 1.0}).dataset
    return inject_missingness(ds, missing, seed=seed) if missing else ds


@pytest.mark.parametrize("seed", range(5))
def test_loglik_matches_dense_density(seed):
    rng = stream_rng(seed, 50)
    ds = _small(3, 4, seed)
    p = random_params(rng, 2)
    assert abs(kalman_loglik(ds, SPEC0, p, jitter=0.0).loglik - dense_loglik(ds, SPEC0, p)) < 1e-8


@pytest.mark.parametrize("shape", [(3, 20), (6, 10), (1, 60), (10, 6)])
def test_loglik_dense_with_missing(shape):
    ds = _small(*shape, seed=sum(shape), missing=0.25)
    p = random_params(stream_rng(sum(shape), 51), 2)
    assert abs(kalman_loglik(ds, SPEC0, p, jitter=0.0).loglik - dense_loglik(ds, SPEC0, p)) < 1e-8


def test_loglik_state_vanishes():
    ds = _small(4, 6, 1)
    p = HdgmParams([3.0, 0.5], 0.0, 1.0, 0.0, 1.7)
    X, _, _ = design_matrix(ds, SPEC0)
    r = ds.response.ravel() - X @ p.beta
    iid = -0.5 * (len(r) * math.log(2 * math.pi * 1.7) + float(r @ r) / 1.7)
    assert kalman_loglik(ds, SPEC0, p).loglik == pytest.approx(iid, abs=1e-9)


def test_scalar_filter_oracle():
    ds = _small(1, 50, 2, missing=0.1)
    p = HdgmParams([1.0, -0.5], 0.6, 1.0, 1.3, 0.4)
    X, _, _ = design_matrix(ds, SPEC0)
    e = ds.response[0] - X @ p.beta
    m, P, ll = 0.0, 1.0 / (1 - p.g**2), 0.0
    for t, y in enumerate(e):
        if t:
            m, P = p.g * m, p.g**2 * P + 1.0
        if np.isfinite(y):
            S = p.v**2 * P + p.sigma2_eps
            k = p.v * P / S
            ll -= 0.5 * (math.log(2 * math.pi * S) + (y - p.v * m) ** 2 / S)
            m, P = m + k * (y - p.v * m), P - k * p.v * P
    assert kalman_loglik(ds, SPEC0, p, jitter=0.0).loglik == pytest.approx(ll, abs=1e-10)


def test_all_missing():
    ds = toy_dataset(np.full((2, 3), np.nan), {"x1": np.zeros((2, 3))})
    with pytest.raises(AllMissing):
        kalman_loglik(ds, SPEC0, HdgmParams([0, 0], 0.5, 1, 1, 1))


@pytest.mark.parametrize("seed", range(3))
def test_em_monotone(seed):
    res = em_fit(sim(n=8, T=60, seed=seed).dataset, XSPEC, max_iter=60)
    assert np.all(np.diff(res.loglik_trace) >= -1e-8)


def test_em_fixed_point():
    ds = sim(n=8, T=80, seed=4).dataset
    first = em_fit(ds, XSPEC, tol=1e-9, max_iter=2000)
    again = em_fit(ds, XSPEC, init=first.params, tol=1e-6)
    assert again.converged and again.n_iter <= 2


def test_em_without_latent_state_is_ols():
    res = sim(n=8, T=150, v=0.0, seed=5)
    ds = res.dataset
    fit = em_fit(ds, XSPEC, tol=1e-10, max_iter=2000)
    X, _, _ = design_matrix(ds, XSPEC)
    ols = np.linalg.lstsq(X, ds.response.ravel(), rcond=None)[0]
    assert fit.params.v < 0.1
    assert np.max(np.abs(fit.params.beta - ols)) < 1e-6


def _fit(ds, p, spec=XSPEC):
    return HdgmFit.from_params(p, ds, spec)


def _truth_beta():
    return make_beta(XSPEC, 40.0, XEFFECTS)


def test_prediction_at_training_station_is_noise_free_signal():
    # z - E[signal | z] = E[eps | z] = sigma2 K^-1 (z - mu) exactly
    ds = _small(3, 6, 6, missing=0.2)
    p = HdgmParams([0.5, 1.0], 0.7, 0.8, 2.0, 1e-3)
    fit = HdgmFit.from_params(p, ds, SPEC0, jitter=0.0)
    X, _, _ = design_matrix(ds, SPEC0)
    from pmspatio.data import distance_matrix
    R = np.exp(-distance_matrix(ds.stations) / p.theta)
    lag = np.abs(np.arange(6)[:, None] - np.arange(6)[None, :])
    K = p.v**2 * np.kron(R, p.g**lag / (1 - p.g**2)) + p.sigma2_eps * np.eye(18)
    z = ds.response.ravel()
    ok = np.isfinite(z)
    gap = np.full(18, np.nan)
    gap[ok] = p.sigma2_eps * np.linalg.solve(K[np.ix_(ok, ok)], z[ok] - X[ok] @ p.beta)
    for i, sid in enumerate(ds.station_ids):
        pred = fit.predict(ds.select([sid]))[0]
        obs = ds.response[i]
        m = np.isfinite(obs)
        assert np.allclose(obs[m] - pred[m], gap.reshape(3, 6)[i][m], rtol=0, atol=1e-10)


def test_prediction_approaches_observation_as_noise_vanishes():
    gaps = []
    for s2 in (1e-4, 1e-5, 1e-6):
        ds = sim(n=6, T=30, s2=s2, seed=6).dataset
        fit = _fit(ds, HdgmParams(_truth_beta(), 0.8, 1.0, 3.0, s2))
        gaps.append(np.max(np.abs(fit.predict(ds.select(["S3"]))[0] - ds.response[3])))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[1] / gaps[0] < 0.2 and gaps[2] / gaps[1] < 0.2


def test_far_target_reverts_to_large_scale():
    ds = sim(n=6, T=30, seed=7).dataset
    p = HdgmParams(_truth_beta(), 0.7, 0.5, 2.0, 0.5)
    fit = _fit(ds, p)
    far = Station("far", -40.0, -60.0)
    cov = {c: 0.3 for c in XSPEC.covariates}
    mean, var = fit.predict_points([(far, ds.dates[10], cov)])
    x = np.zeros(len(p.beta))
    x[0] = 1.0
    x[-3:] = 0.3
    assert mean[0] == pytest.approx(x @ p.beta, abs=1e-9)
    assert var[0] == pytest.approx(p.v**2 / (1 - p.g**2) + p.sigma2_eps, rel=1e-9)


def test_prediction_permutation_equivariant():
    ds = sim(n=7, T=30, seed=8).dataset
    p = HdgmParams(_truth_beta(), 0.6, 0.8, 2.0, 0.7)
    target = ds.select(["S2"])
    a = _fit(ds.drop(["S2"]), p).predict(target, return_var=True)
    perm = ds.drop(["S2"]).select(list(reversed(ds.drop(["S2"]).station_ids)))
    b = _fit(perm, p).predict(target, return_var=True)
    assert np.allclose(a[0], b[0], rtol=0, atol=1e-9)
    assert np.allclose(a[1], b[1], rtol=0, atol=1e-9)


def test_g_zero_smoother_is_local_in_time():
    ds = _small(4, 12, 9)
    p = HdgmParams([1.0, 1.0], 0.0, 1.0, 1.5, 0.5)
    a = kalman_loglik(ds, SPEC0, p).smoothed.mean
    resp = np.array(ds.response)
    resp[:, 7] += 10.0
    b = kalman_loglik(ds.with_response(resp), SPEC0, p).smoothed.mean
    other = np.arange(12) != 7
    assert np.allclose(a[:, other], b[:, other], rtol=0, atol=1e-12)
    assert not np.allclose(a[:, 7], b[:, 7])


def test_target_errors():
    ds = sim(n=4, T=20, seed=1).dataset
    fit = _fit(ds, HdgmParams(_truth_beta(), 0.5, 1.0, 1.0, 1.0))
    late = sim(n=4, T=20, seed=1).dataset
    late = toy_dataset(late.response, dict(late.covariates), start="2017-01-01", stations=late.stations)
    with pytest.raises(TargetOutsideDateRange):
        fit.predict(late)
    with pytest.raises(MissingTargetCovariate):
        fit.predict_points([(ds.stations[0], ds.dates[0], {"x1": 0.0})])


def test_json_round_trip():
    ds = sim(n=5, T=30, seed=2).dataset
    fit = HdgmConfig(max_iter=20).fit(ds, XSPEC)
    d = json.loads(json.dumps(fit.to_dict()))
    back = HdgmFit.from_dict(d, ds)
    assert np.array_equal(back.predict(ds), fit.predict(ds))
    assert d["beta_se_kind"] == "GLS-conditional"


def test_gls_matches_dense_gls():
    ds = _small(3, 8, 3, missing=0.2)
    p = HdgmParams([0.0, 0.0], 0.5, 0.7, 1.2, 0.6)
    beta, cov, _ = gls_beta(ds, SPEC0, p, jitter=0.0)
    from pmspatio.data import distance_matrix
    R = np.exp(-distance_matrix(ds.stations) / p.theta)
    lag = np.abs(np.arange(8)[:, None] - np.arange(8)[None, :])
    K = p.v**2 * np.kron(R, p.g**lag / (1 - p.g**2)) + p.sigma2_eps * np.eye(24)
    X, _, _ = design_matrix(ds, SPEC0)
    z = ds.response.ravel()
    ok = np.isfinite(z)
    Ki = np.linalg.inv(K[np.ix_(ok, ok)])
    A = X[ok].T @ Ki @ X[ok]
    assert np.allclose(beta, np.linalg.solve(A, X[ok].T @ Ki @ z[ok]), atol=1e-9)
    assert np.allclose(cov, np.linalg.inv(A), atol=1e-9)


@pytest.mark.slow
def test_losocv_r2_on_simulated_network():
    # the package's default simulation: standard covariates, g = 0.72, theta = 0.79
    from pmspatio.cli import SIM_EFFECTS
    from pmspatio.data import DEFAULT_LINEAR_SPEC
    ds = sim(n=20, T=150, g=0.72, theta=0.79, seed=11, spec=DEFAULT_LINEAR_SPEC, effects=SIM_EFFECTS).dataset
    rep = losocv(ds, HdgmConfig(), DEFAULT_LINEAR_SPEC)
    assert not rep.failed
    assert rep.pooled.r2 > 0.8
