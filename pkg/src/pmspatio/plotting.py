"""Static figures for CLI reports.  Output is deterministic: fixed SVG hash
salt and no date metadata, so reruns give byte-identical files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "pmspatio"
_META = {"svg": {"Date": None, "Creator": None}, "png": {"Software": None}}


def _save(fig, path) -> None:
    fmt = str(path).rsplit(".", 1)[-1].lower()
    fig.savefig(path, format=fmt, metadata=_META.get(fmt))
    plt.close(fig)


def variogram_figure(vg, path, max_lines: int = 6, fitted=None) -> None:
    """Semivariance against distance, one line per time lag."""
    fig, ax = plt.subplots(figsize=(6, 4))
    lags = vg.time_lags
    pick = np.unique(np.linspace(0, len(lags) - 1, min(max_lines, len(lags))).astype(int))
    colors = plt.cm.viridis(np.linspace(0, 1, len(pick)))
    for c, j in zip(colors, pick):
        ok = vg.counts[:, j] > 0
        ax.plot(vg.centers[ok], vg.gamma[ok, j], "o-", color=c, ms=3, label=f"lag {lags[j]}")
        if fitted is not None:
            from .variogram import separable_model
            h = np.linspace(0, vg.space_bin_edges[-1], 100)
            ax.plot(h, separable_model(h, lags[j], fitted), "--", color=c, lw=0.8)
    ax.set_xlabel("distance (deg)")
    ax.set_ylabel("semivariance")
    ax.legend(fontsize=7)
    _save(fig, path)


def pdp_figure(curve, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(curve.grid, curve.mean_prediction, "-")
    ax.set_xlabel(curve.variable)
    ax.set_ylabel("mean large-scale prediction")
    _save(fig, path)


def moving_average_figure(report, path, window: int = 15) -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    for f in report.folds:
        if f.failed:
            continue
        ax.plot(f.dates.astype("datetime64[D]").astype(object), f.moving_average(window), lw=0.7)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_ylabel(f"{window}-day moving average of error")
    fig.autofmt_xdate()
    _save(fig, path)


def rmse_figure(report, path) -> None:
    ok = [f for f in report.folds if not f.failed]
    fig, ax = plt.subplots(figsize=(max(4, 0.3 * len(ok) + 2), 3.5))
    ax.bar(range(len(ok)), [f.metrics.rmse for f in ok])
    ax.set_xticks(range(len(ok)))
    ax.set_xticklabels([f.station_id for f in ok], rotation=90, fontsize=6)
    ax.set_ylabel("RMSE")
    fig.tight_layout()
    _save(fig, path)


def monthly_sd_figure(sd, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(np.arange(1, 13), sd, "o-")
    ax.set_xticks(np.arange(1, 13))
    ax.set_xlabel("month")
    ax.set_ylabel("residual SD")
    _save(fig, path)


def acf_figure(acfs: dict, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for a in acfs.values():
        if a is not None:
            ax.plot(np.arange(len(a)), a, lw=0.6, color="0.4")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("lag (days)")
    ax.set_ylabel("ACF")
    _save(fig, path)


def curve_figure(x, fit, lo, hi, name, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.fill_between(x, lo, hi, color="0.85")
    ax.plot(x, fit, "-")
    ax.set_xlabel(name)
    ax.set_ylabel("smooth effect")
    _save(fig, path)


def importance_figure(table, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 0.25 * len(table.variables) + 1.5))
    y = np.arange(len(table.variables))[::-1]
    ax.barh(y, table.pct_inc_mse)
    ax.set_yticks(y)
    ax.set_yticklabels(table.variables, fontsize=7)
    ax.set_xlabel("%IncMSE")
    fig.tight_layout()
    _save(fig, path)
