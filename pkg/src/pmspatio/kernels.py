"""Exponential and separable space-time correlation primitives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import distance_matrix
from .errors import DuplicateLocationWithoutJitter, NonFiniteInput, NotPositiveDefinite

DEFAULT_JITTER = 1e-8


@dataclass(frozen=True)
class ExpCorrParams:
    range_theta: float

    def __post_init__(self):
        if not (np.isfinite(self.range_theta) and self.range_theta > 0):
            raise NonFiniteInput(f"range must be positive and finite, got {self.range_theta}")


@dataclass(frozen=True)
class SeparableCorrParams:
    theta_s: float
    theta_t: float
    sill: float
    nugget: float = 0.0

    def __post_init__(self):
        vals = (self.theta_s, self.theta_t, self.sill, self.nugget)
        if not all(np.isfinite(v) for v in vals):
            raise NonFiniteInput(f"non-finite separable parameters {vals}")
        if self.theta_s <= 0 or self.theta_t <= 0 or self.sill < 0 or self.nugget < 0:
            raise NonFiniteInput(f"invalid separable parameters {vals}")

    def to_dict(self) -> dict:
        return {"theta_s": self.theta_s, "theta_t": self.theta_t, "sill": self.sill, "nugget": self.nugget}


def _theta(theta) -> float:
    return theta.range_theta if isinstance(theta, ExpCorrParams) else float(theta)


def exp_corr(d, theta):
    """``exp(-d / theta)``; works element-wise on arrays."""
    th = _theta(theta)
    d = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(d)) or not np.isfinite(th) or th <= 0:
        raise NonFiniteInput("distances and range must be finite, range > 0")
    if np.any(d < 0):
        raise NonFiniteInput("distances must be non-negative")
    out = np.exp(-d / th)
    return float(out) if out.ndim == 0 else out


def separable_corr(h, u, p: SeparableCorrParams):
    """Product of the spatial and temporal exponential correlations."""
    return exp_corr(h, p.theta_s) * exp_corr(u, p.theta_t)


def corr_from_distance(D: np.ndarray, theta, jitter: float = DEFAULT_JITTER) -> np.ndarray:
    R = exp_corr(D, theta)
    R = np.array(R, dtype=float, ndmin=2)
    R[np.diag_indices_from(R)] += jitter
    return R


def corr_matrix(locations, theta, jitter: float = DEFAULT_JITTER) -> np.ndarray:
    """Exponential correlation matrix over great-circle distances."""
    D = distance_matrix(locations)
    if jitter <= 0:
        off = D[~np.eye(len(D), dtype=bool)]
        if np.any(off == 0):
            raise DuplicateLocationWithoutJitter("coincident stations need jitter > 0")
    return corr_from_distance(D, theta, jitter)


def cholesky(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, raising NotPositiveDefinite on failure."""
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def chol_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``A X = B`` for symmetric positive-definite ``A``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    try:
        c = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return scipy.linalg.cho_solve(c, B)


def logdet_chol(L: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(L))))
