import json

import numpy as np
import pytest

from pmspatio.data import Dataset, ModelSpec, Station, distance_matrix
from pmspatio.errors import TooFewDistinctValues
from pmspatio.gamm import (
    GammConfig, GammFit, _build, _prev_index, _qr_reduce, _select_lambda, cubic_basis, fit_gamm,
    kammann_wand_theta, penalized_fit, quasi_difference, spatial_basis,
)
from pmspatio.simulate import random_stations, stream_rng

SMOOTH_X = ModelSpec(smooth_terms=("x",), include_month_dummies=False)
PLAIN = dict(fit_ar=False, spatial=False)


def _panel(y, x, seed=0):
    n, T = y.shape
    dates = np.datetime64("2016-01-01") + np.arange(T)
    return Dataset(tuple(random_stations(n, seed)), dates, y, {"x": x})


def _sine(n=10, T=200, seed=1, noise=0.3):
    rng = stream_rng(seed, 0)
    x = rng.uniform(0, 1, (n, T))
    y = 3 + np.sin(2 * np.pi * x) + noise * rng.standard_normal((n, T))
    return _panel(y, x), x, y


def _ar1(n, T, g, rng):
    w = rng.standard_normal((n, T))
    e = np.empty((n, T))
    e[:, 0] = w[:, 0] / np.sqrt(1 - g * g)
    for t in range(1, T):
        e[:, t] = g * e[:, t - 1] + w[:, t]
    return e


def test_knots_at_quantiles():
    x = np.linspace(0, 1, 1001)
    basis, B = cubic_basis(x, 10)
    assert np.allclose(basis.knots, np.arange(10) / 9, atol=1e-12)
    assert B.shape == (1001, 10)


def test_too_few_distinct_values():
    with pytest.raises(TooFewDistinctValues):
        cubic_basis(np.repeat([1.0, 2.0, 3.0], 5), 4)


def test_basis_spans_linear_and_penalty_null_space():
    x = np.linspace(-2, 5, 300)
    basis, B = cubic_basis(x, 8)
    # value-at-knot parameterisation: a + b x has coefficients a + b knots
    c = 1.5 - 0.7 * basis.knots
    assert np.allclose(B @ c, 1.5 - 0.7 * x, atol=1e-12)
    assert abs(c @ basis.penalty @ c) < 1e-10
    S = basis.penalty
    assert np.allclose(S, S.T) and np.min(np.linalg.eigvalsh(S)) > -1e-10


def test_penalty_is_integrated_squared_curvature():
    x = np.linspace(0, 1, 50)
    basis, _ = cubic_basis(x, 6)
    c = np.cos(3 * basis.knots)
    grid = np.linspace(0, 1, 20001)
    f = basis.raw(grid) @ c
    d2 = np.gradient(np.gradient(f, grid), grid)
    assert c @ basis.penalty @ c == pytest.approx(np.trapezoid(d2[5:-5] ** 2, grid[5:-5]), rel=1e-2)


def test_linear_extrapolation():
    basis, _ = cubic_basis(np.linspace(0, 1, 100), 7)
    c = np.sin(4 * basis.knots)
    out = basis.raw(np.array([-1.0, -0.5, 0.0, 1.0, 1.5, 2.0])) @ c
    assert out[0] - out[1] == pytest.approx(out[1] - out[2], abs=1e-12)
    assert out[5] - out[4] == pytest.approx(out[4] - out[3], abs=1e-12)


@pytest.mark.parametrize("lam", [1e-6, 1.0, 1e6])
def test_linear_truth_reproduced_for_any_lambda(lam):
    rng = stream_rng(2, 0)
    x = rng.uniform(0, 1, (5, 40))
    ds = _panel(2.0 + 3.0 * x, x)
    fit = fit_gamm(ds, SMOOTH_X, config=GammConfig(fixed_lambda=lam, **PLAIN))
    g = np.linspace(0, 1, 11)
    assert np.allclose(fit.beta_linear[0] + fit.smooth_term("x", g), 2.0 + 3.0 * g, atol=1e-8)


def test_huge_lambda_is_ols_line():
    ds, x, y = _sine()
    fit = fit_gamm(ds, SMOOTH_X, config=GammConfig(fixed_lambda=1e12, **PLAIN))
    A = np.column_stack([np.ones(x.size), x.ravel()])
    b = np.linalg.lstsq(A, y.ravel(), rcond=None)[0]
    g = np.linspace(0, 1, 101)
    assert np.max(np.abs(fit.beta_linear[0] + fit.smooth_term("x", g) - (b[0] + b[1] * g))) < 1e-4


def test_linear_truth_with_gcv():
    rng = stream_rng(3, 0)
    x = rng.uniform(0, 1, (8, 100))
    ds = _panel(2 + 3 * x + 0.5 * rng.standard_normal(x.shape), x)
    fit = fit_gamm(ds, SMOOTH_X, config=GammConfig(**PLAIN))
    f = fit.smooth_term("x", np.array([0.0, 1.0]))
    assert f[1] - f[0] == pytest.approx(3.0, abs=0.1)
    assert fit.edf["x"] < 1.5


def test_quasi_difference_g_zero_bit_for_bit():
    ds, _, y = _sine(n=4, T=50)
    rows = ds.rows(observed_only=True)
    X, *_ , blocks, _, _ = _build(rows, SMOOTH_X, GammConfig(spatial=False), None, ds.latlon)
    prev = _prev_index(rows)
    Xq = quasi_difference(X, prev, 0.0)
    yq = quasi_difference(rows.y[:, None], prev, 0.0)[:, 0]
    assert np.array_equal(Xq, X) and np.array_equal(yq, rows.y)
    a = penalized_fit(*_qr_reduce(X, rows.y), len(y.ravel()), blocks, [0.3])
    b = penalized_fit(*_qr_reduce(Xq, yq), len(y.ravel()), blocks, [0.3])
    assert np.array_equal(a.coef, b.coef) and a.rss == b.rss


def test_quasi_difference_rule():
    M = np.arange(8.0).reshape(4, 2)
    prev = np.array([-1, 0, 1, -1])
    out = quasi_difference(M, prev, 0.5)
    assert np.allclose(out[0], np.sqrt(0.75) * M[0])
    assert np.allclose(out[1], M[1] - 0.5 * M[0])
    assert np.allclose(out[3], np.sqrt(0.75) * M[3])


def test_edf_decreases_in_lambda_and_bounded():
    ds, _, y = _sine(n=4, T=60)
    rows = ds.rows(observed_only=True)
    X, _, _, _, blocks, _, _ = _build(rows, SMOOTH_X, GammConfig(spatial=False), None, ds.latlon)
    R, f, rss0 = _qr_reduce(X, rows.y)
    sl = blocks.slices[0]
    edfs = [penalized_fit(R, f, rss0, len(rows.y), blocks, [lam]).edf[sl].sum() for lam in 10.0 ** np.arange(-6, 9)]
    assert np.all(np.diff(edfs) < 1e-9)
    total = penalized_fit(R, f, rss0, len(rows.y), blocks, [1.0]).edf.sum()
    assert total <= X.shape[1] + 1e-9


def test_lambda_search_never_increases_gcv():
    ds, _, _ = _sine(n=5, T=60)
    rows = ds.rows(observed_only=True)
    X, _, _, _, blocks, _, _ = _build(rows, ModelSpec(smooth_terms=("x",), include_month_dummies=False),
                                      GammConfig(), None, ds.latlon)
    R, f, rss0 = _qr_reduce(X, rows.y)
    from pmspatio.gamm import LAMBDA_GRID
    _, _, hist = _select_lambda(R, f, rss0, len(rows.y), blocks, [1.0] * len(blocks.slices), LAMBDA_GRID, 2)
    assert np.all(np.diff(hist) <= 0)


def test_ar_coefficient_recovery():
    rng = stream_rng(4, 0)
    x = rng.uniform(0, 1, (10, 500))
    ds = _panel(3.0 + _ar1(10, 500, 0.67, rng), x)
    fit = fit_gamm(ds, SMOOTH_X)
    assert fit.g_gamm == pytest.approx(0.67, abs=0.05)
    assert fit.converged


def test_constant_response():
    rng = stream_rng(5, 0)
    x = rng.uniform(0, 1, (4, 60))
    fit = fit_gamm(_panel(np.full((4, 60), 7.0), x), SMOOTH_X)
    assert fit.beta_linear[0] == pytest.approx(7.0, abs=1e-9)
    assert np.max(np.abs(fit.smooth_term("x", np.linspace(0, 1, 9)))) < 1e-9
    assert fit.g_gamm == 0.0


def test_spatial_basis_contracts():
    knots = [Station("a", 45, 9), Station("b", 46, 9), Station("c", 47, 9)]
    assert kammann_wand_theta(knots) == pytest.approx(2.0, abs=1e-12)
    Zs, Om, th = spatial_basis([knots[1]], knots)
    assert th == pytest.approx(2.0) and Zs[0, 1] == 1.0
    st = random_stations(10, 3)
    kn = random_stations(10, 4)
    Zs, Om, _ = spatial_basis(st, kn, 0.7)
    D = distance_matrix(st, kn)
    for i in range(10):
        for k in range(10):
            assert Zs[i, k] == pytest.approx(np.exp(-D[i, k] / 0.7), abs=1e-15)


def test_predict_g_zero_and_own_lag():
    rng = stream_rng(6, 0)
    x = rng.uniform(0, 1, (6, 120))
    ds = _panel(5 + np.sin(3 * x) + _ar1(6, 120, 0.6, rng), x)
    fit = fit_gamm(ds, SMOOTH_X)
    ll = ds.latlon
    base = fit.predict_large_scale(ds) + fit.spatial_effect(ll[:, 0], ll[:, 1])[:, None]
    assert np.array_equal(fit.predict(ds), base)
    own = fit.predict(ds, use_own_lag=True)
    expect = base[:, 1:] + fit.g_gamm * (ds.response[:, :-1] - base[:, :-1])
    assert np.allclose(own[:, 1:], expect, atol=1e-12)
    fit.g_gamm = 0.0
    assert np.array_equal(fit.predict(ds, use_own_lag=True), base)


def test_interpolation_limit():
    xs = np.linspace(0, 1, 15)
    x = np.tile(xs, (3, 1))
    y = 10 + np.cos(7 * x) + 0.3 * np.sign(np.sin(40 * x))
    ds = _panel(y, x)
    fit = fit_gamm(ds, SMOOTH_X, k=15, config=GammConfig(fixed_lambda=1e-9, **PLAIN))
    assert np.max(np.abs(fit.predict(ds) - y)) < 1e-4


def test_spatial_effect_continuous():
    rng = stream_rng(7, 0)
    x = rng.uniform(0, 1, (12, 80))
    st = random_stations(12, 7)
    field = 2 * np.array([s.latitude - 45.8 for s in st])
    ds = Dataset(tuple(st), np.datetime64("2016-01-01") + np.arange(80), 10 + field[:, None] + x, {"x": x})
    fit = fit_gamm(ds, SMOOTH_X, config=GammConfig(fit_ar=False))
    lat = 45.5 + np.zeros(6)
    lon = 9.5 + np.array([0, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    c = fit.spatial_effect(lat, lon)
    gaps = np.abs(c[1:] - c[0])
    assert np.all(np.diff(gaps) < 0) and gaps[-1] < 1e-5


def test_json_round_trip_and_curve():
    ds, _, _ = _sine(n=6, T=60)
    fit = fit_gamm(ds, SMOOTH_X)
    back = GammFit.from_dict(json.loads(json.dumps(fit.to_dict())))
    assert np.allclose(back.predict(ds), fit.predict(ds), rtol=0, atol=1e-12)
    f, lo, hi = fit.curve("x", np.linspace(0, 1, 20))
    assert np.all(lo <= f) and np.all(f <= hi)
