"""Compiled Kalman filter and RTS smoother for the dense AR(1) state.

Both kernels work on small dense matrices, so hand-written Cholesky and
triangular solves avoid per-step Python and LAPACK call overhead.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

LOG2PI = math.log(2.0 * math.pi)


@njit(cache=True, nogil=True)
def _chol(S, L):
    """Lower Cholesky factor of S into L; returns False if S is not PD."""
    k = S.shape[0]
    for j in range(k):
        s = S[j, j]
        for q in range(j):
            s -= L[j, q] * L[j, q]
        if not s > 0.0:
            return False
        d = math.sqrt(s)
        L[j, j] = d
        for i in range(j + 1, k):
            s = S[i, j]
            for q in range(j):
                s -= L[i, q] * L[j, q]
            L[i, j] = s / d
        for i in range(j):
            L[i, j] = 0.0
    return True


@njit(cache=True, nogil=True)
def _fwd(L, B):
    """Solve L X = B in place (L lower triangular, B is k x m)."""
    k, m = B.shape
    for c in range(m):
        for i in range(k):
            s = B[i, c]
            for q in range(i):
                s -= L[i, q] * B[q, c]
            B[i, c] = s / L[i, i]


@njit(cache=True, nogil=True)
def _bwd(L, B):
    """Solve L' X = B in place."""
    k, m = B.shape
    for c in range(m):
        for i in range(k - 1, -1, -1):
            s = B[i, c]
            for q in range(i + 1, k):
                s -= L[q, i] * B[q, c]
            B[i, c] = s / L[i, i]


@njit(cache=True, nogil=True)
def kalman_filter(resid, obs, Gam, g, v, s2):
    """Forward pass.  Returns (loglik, mf, Pf, Pp, bad_t); ``bad_t >= 0`` marks
    the first day whose innovation covariance was not positive definite."""
    n, T = resid.shape
    Pf = np.empty((T, n, n))
    Pp = np.empty((T, n, n))
    mf = np.empty((n, T))
    m = np.zeros(n)
    P = Gam / (1.0 - g * g)
    v2 = v * v
    ll = 0.0
    idx = np.empty(n, dtype=np.int64)
    for t in range(T):
        if t > 0:
            m = g * m
            P = (g * g) * P + Gam
        Pp[t] = P
        k = 0
        for i in range(n):
            if obs[i, t]:
                idx[k] = i
                k += 1
        if k:
            S = np.empty((k, k))
            W = np.empty((k, n))
            a = np.empty((k, 1))
            for r in range(k):
                ir = idx[r]
                for c in range(k):
                    S[r, c] = v2 * P[ir, idx[c]]
                S[r, r] += s2
                for c in range(n):
                    W[r, c] = v * P[ir, c]
                a[r, 0] = resid[ir, t] - v * m[ir]
            L = np.zeros((k, k))
            if not _chol(S, L):
                return ll, mf, Pf, Pp, t
            _fwd(L, W)
            _fwd(L, a)
            m = m + a[:, 0].copy() @ W
            P = P - W.T @ W
            P = 0.5 * (P + P.T)
            logdet = 0.0
            q = 0.0
            for r in range(k):
                logdet += math.log(L[r, r])
                q += a[r, 0] * a[r, 0]
            ll -= 0.5 * (k * LOG2PI + 2.0 * logdet + q)
        mf[:, t] = m
        Pf[t] = P
    return ll, mf, Pf, Pp, -1


@njit(cache=True, nogil=True)
def rts_smoother(mf, Pf, Pp, g, proj):
    """Backward pass.  Returns (ms, var, proj_var, P1, A, B, C) where A, B, C
    are the sums of E[x_t x_t'] (t >= 1), E[x_t x_{t-1}'] and E[x_t x_t']
    (t < T-1), and P1 = E[x_0 x_0']; ``proj_var`` is diag(W' P_t W) per day."""
    n, T = mf.shape
    mp = proj.shape[1]
    ms = np.empty((n, T))
    var = np.empty((n, T))
    pv = np.empty((mp, T))
    ms[:, T - 1] = mf[:, T - 1]
    Ps = Pf[T - 1].copy()
    for i in range(n):
        var[i, T - 1] = Ps[i, i]
    if mp:
        PW = Ps @ proj
        for c in range(mp):
            pv[c, T - 1] = np.sum(proj[:, c] * PW[:, c])
    E_last = Ps + np.outer(ms[:, T - 1], ms[:, T - 1])
    A = np.zeros((n, n))
    B = np.zeros((n, n))
    C = np.zeros((n, n))
    P1 = E_last.copy()
    if T > 1:
        A += E_last
    L = np.zeros((n, n))
    for t in range(T - 2, -1, -1):
        if g == 0.0:
            J = np.zeros((n, n))
        else:
            _chol(Pp[t + 1], L)
            X = g * Pf[t]            # symmetric, so J' = Pp^{-1} g Pf
            _fwd(L, X)
            _bwd(L, X)
            J = X.T.copy()
        d = ms[:, t + 1] - g * mf[:, t]
        ms[:, t] = mf[:, t] + J @ d
        cross = Ps @ J.T
        B += cross + np.outer(ms[:, t + 1], ms[:, t])
        Ps = Pf[t] + J @ (Ps - Pp[t + 1]) @ J.T
        Ps = 0.5 * (Ps + Ps.T)
        for i in range(n):
            var[i, t] = Ps[i, i]
        if mp:
            PW = Ps @ proj
            for c in range(mp):
                pv[c, t] = np.sum(proj[:, c] * PW[:, c])
        Et = Ps + np.outer(ms[:, t], ms[:, t])
        C += Et
        if t >= 1:
            A += Et
        else:
            P1 = Et
    return ms, var, pv, P1, A, B, C
