import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmspatio.data import Station, distance_matrix
from pmspatio.errors import DuplicateLocationWithoutJitter, NonFiniteInput, NotPositiveDefinite
from pmspatio.kernels import (
    ExpCorrParams, SeparableCorrParams, chol_solve, cholesky, corr_matrix, exp_corr, separable_corr,
)
from pmspatio.simulate import random_stations


def test_exp_corr_examples():
    assert exp_corr(0.0, ExpCorrParams(0.79)) == 1.0
    assert exp_corr(2.5, 2.5) == pytest.approx(math.exp(-1), abs=1e-15)
    r = exp_corr(0.719, 0.79)
    assert r == pytest.approx(0.402, abs=1e-3)
    assert r > 0.37


def test_exp_corr_rejects_bad_input():
    with pytest.raises(NonFiniteInput):
        exp_corr(np.nan, 1.0)
    with pytest.raises(NonFiniteInput):
        exp_corr(-1.0, 1.0)
    with pytest.raises(NonFiniteInput):
        ExpCorrParams(0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 50), st.floats(0, 50), st.floats(0.01, 10))
def test_exp_corr_monotone(d1, d2, th):
    if d1 < d2 and math.exp(-d2 / th) > 0:
        assert exp_corr(d1, th) >= exp_corr(d2, th)
        if math.exp(-d1 / th) != math.exp(-d2 / th):
            assert exp_corr(d1, th) > exp_corr(d2, th)


def test_separable_examples():
    p = SeparableCorrParams(0.48, 0.78, 1.0)
    assert separable_corr(0.0, 0.0, p) == 1.0
    assert separable_corr(0.48, 0.78, p) == pytest.approx(math.exp(-2), abs=1e-15)
    assert separable_corr(0.48, 0.0, p) == pytest.approx(math.exp(-1), abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 5), st.floats(0, 30), st.floats(0.05, 3), st.floats(0.1, 10))
def test_separable_is_product(h, u, ts, tt):
    p = SeparableCorrParams(ts, tt, 1.0)
    assert separable_corr(h, u, p) == exp_corr(h, ts) * exp_corr(u, tt)


def test_corr_matrix_examples():
    one = corr_matrix([Station("a", 45, 9)], 0.79, jitter=1e-8)
    assert one.shape == (1, 1) and one[0, 0] == 1.0 + 1e-8
    a, b = Station("a", 45.0, 9.0), Station("b", 45.79, 9.0)
    C = corr_matrix([a, b], 0.79)
    assert C[0, 1] == pytest.approx(math.exp(-1), abs=1e-12)


def test_corr_matrix_pairwise_oracle():
    stn = random_stations(5, 3)
    C = corr_matrix(stn, 0.6, jitter=0.0)
    D = distance_matrix(stn)
    for i in range(5):
        for j in range(5):
            assert C[i, j] == pytest.approx(math.exp(-D[i, j] / 0.6), abs=1e-15)
    assert np.array_equal(C, C.T)


@pytest.mark.parametrize("n", [2, 10, 50])
def test_corr_matrix_pd(n):
    C = corr_matrix(random_stations(n, n), 0.79)
    cholesky(C)
    assert np.all(np.linalg.eigvalsh(C) > 0)


def test_duplicates_need_jitter():
    a = Station("a", 45, 9)
    b = Station("b", 45, 9)
    with pytest.raises(DuplicateLocationWithoutJitter):
        corr_matrix([a, b], 1.0, jitter=0.0)
    cholesky(corr_matrix([a, b], 1.0, jitter=1e-6))


def test_chol_solve_examples(rng):
    B = rng.standard_normal((4, 2))
    assert np.allclose(chol_solve(np.eye(4), B), B, atol=0, rtol=0)
    assert chol_solve(np.diag([4.0]), np.array([2.0]))[0] == 0.5
    M = rng.standard_normal((6, 6))
    A = M @ M.T + 6 * np.eye(6)
    B = rng.standard_normal((6, 3))
    X = chol_solve(A, B)
    assert np.max(np.abs(A @ X - B)) <= 1e-8 * np.max(np.abs(B))


def test_chol_solve_not_pd():
    with pytest.raises(NotPositiveDefinite):
        chol_solve(np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones(2))
