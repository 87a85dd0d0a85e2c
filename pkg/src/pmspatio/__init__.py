"""Spatiotemporal models for daily PM2.5 station panels.

Three estimators share one data layer: a hidden dynamic geostatistical model
fitted by EM (``hdgm``), an additive model with a spatial smooth and AR(1)
errors (``gamm``) and a random forest with residual space-time kriging
(``rfstk``).  ``evaluation`` cross-validates them by leaving out one station at
a time and ``interpret`` computes partial dependence and variable importance.
"""

from .data import (
    DEFAULT_GAMM_SPEC, DEFAULT_LINEAR_SPEC, Dataset, ModelSpec, Schema, Station, distance_matrix, load_csv, write_csv,
)
from .evaluation import BaselineConfig, CVReport, Metrics, losocv, metrics, residual_diagnostics
from .gamm import GammConfig, GammFit, fit_gamm, predict_gamm
from .hdgm import HdgmConfig, HdgmFit, HdgmParams, em_fit, kalman_loglik
from .interpret import coefficient_report, pdp, permutation_importance
from .kernels import SeparableCorrParams, corr_matrix, exp_corr
from .rfstk import ForestConfig, RfstkConfig, RfstkFit, fit_forest, fit_rfstk, fit_tree, predict_rfstk
from .simulate import SimConfig, inject_missingness, simulate_hdgm, stream_rng
from .variogram import VariogramGrid, empirical_variogram, fit_separable

__version__ = "0.1.0"
