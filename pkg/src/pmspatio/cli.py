"""Command-line front end.

Every command writes its artifacts under ``--out`` together with a
``manifest.json`` (file list with SHA-256, config hash, seed).  Options may
come from a TOML file given with ``--config``; flags on the command line win.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from .data import (
    DEFAULT_GAMM_SPEC, DEFAULT_LINEAR_SPEC, STANDARD_COVARIATES, Dataset, ModelSpec, Schema, load_csv, write_csv,
)
from .errors import PmspatioError, UnknownCovariate, UnknownVariable

try:
    import tomllib
except ModuleNotFoundError:       # Python < 3.11
    import tomli as tomllib

MODELS = ("hdgm", "gamm", "rfstk", "baseline-mean")
#: Covariate effects of the ``simulate`` command (per unit of a standardised covariate).
SIM_EFFECTS = {"WE_temp_2m": -2.0, "WE_rh_mean": 1.5, "WE_wind_speed_100m_mean": -1.946, "WE_blh_layer_max": -3.0}

RESERVED = ("IDStations", "Latitude", "Longitude", "Time", "AQ_pm25")

# Options that belong to one model only; used to reject misplaced flags.
MODEL_OPTIONS = {
    "hdgm": ("tol", "max_iter"),
    "gamm": ("tol", "max_iter", "k", "theta_gamm", "theta_search", "own_lag"),
    "rfstk": ("n_tree", "mtry", "min_leaf", "no_bootstrap", "neighbors", "vg_max_lag", "vg_bins"),
    "baseline-mean": (),
}
ALL_MODEL_OPTIONS = sorted({o for v in MODEL_OPTIONS.values() for o in v})
# Not part of the config hash: they never change the numbers written.
UNHASHED = {"out", "threads", "config", "command", "func"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _csv_list(s):
    return [x.strip() for x in s.split(",") if x.strip()] if s else []


def _read_dataset(path) -> Dataset:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {path}")
    try:
        header = pd.read_csv(p, nrows=0).columns
        covs = [c for c in header if c not in RESERVED]
        return load_csv(p, Schema.with_covariates(covs))
    except (PmspatioError, ValueError, pd.errors.ParserError) as exc:
        raise UsageError(f"cannot load {path}: {type(exc).__name__}: {exc}") from exc


def _spec(args, ds: Dataset, model: str) -> ModelSpec:
    names = ds.covariate_names
    months = not getattr(args, "no_month_dummies", False)
    lin, smo = _csv_list(getattr(args, "linear", None)), _csv_list(getattr(args, "smooth", None))
    if lin or smo:
        spec = ModelSpec(tuple(lin), tuple(smo), months)
    else:
        base = DEFAULT_GAMM_SPEC if model == "gamm" else DEFAULT_LINEAR_SPEC
        if all(c in names for c in STANDARD_COVARIATES):
            spec = ModelSpec(base.linear_terms, base.smooth_terms, months)
        elif model == "gamm":
            spec = ModelSpec((), tuple(names), months)
        else:
            spec = ModelSpec(tuple(names), (), months)
    try:
        spec.check(names)
    except UnknownCovariate as exc:
        raise UsageError(f"unknown covariate {exc}") from exc
    return spec


def _model_config(args):
    from .evaluation import BaselineConfig
    from .gamm import GammConfig
    from .hdgm import HdgmConfig
    from .rfstk import ForestConfig, RfstkConfig

    m = args.model
    if m not in MODELS:
        raise UsageError(f"unknown model {m!r}; choose from {', '.join(MODELS)}")
    for opt in ALL_MODEL_OPTIONS:
        v = getattr(args, opt, None)
        if v not in (None, False) and opt not in MODEL_OPTIONS[m]:
            raise UsageError(f"--{opt.replace('_', '-')} does not apply to model {m}")
    if m == "hdgm":
        cfg = HdgmConfig()
        if args.tol is not None:
            cfg.tol = args.tol
        if args.max_iter is not None:
            cfg.max_iter = args.max_iter
        return cfg
    if m == "gamm":
        cfg = GammConfig(use_own_lag=bool(args.own_lag), theta_search=bool(args.theta_search))
        for a, b in (("k", "k"), ("theta_gamm", "theta"), ("tol", "tol"), ("max_iter", "max_iter")):
            if getattr(args, a) is not None:
                setattr(cfg, b, getattr(args, a))
        return cfg
    if m == "rfstk":
        fc = ForestConfig(
            n_tree=args.n_tree if args.n_tree is not None else 500, mtry=args.mtry,
            min_leaf=args.min_leaf if args.min_leaf is not None else 5,
            bootstrap=not args.no_bootstrap, seed=args.seed,
        )
        cfg = RfstkConfig(forest=fc, threads=args.threads)
        if args.neighbors is not None:
            cfg.n_neighbors = args.neighbors
        if args.vg_max_lag is not None:
            cfg.max_lag = args.vg_max_lag
        if args.vg_bins is not None:
            cfg.n_bins = args.vg_bins
        return cfg
    return BaselineConfig()


def _config_hash(args) -> str:
    d = {k: v for k, v in sorted(vars(args).items()) if k not in UNHASHED}
    blob = json.dumps(d, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _write_manifest(out: Path, args, files) -> None:
    entries = []
    for f in sorted(set(Path(p) for p in files)):
        data = f.read_bytes()
        entries.append({"file": f.relative_to(out).as_posix(), "sha256": hashlib.sha256(data).hexdigest(),
                        "bytes": len(data)})
    man = {"command": args.command, "config_hash": _config_hash(args), "seed": getattr(args, "seed", None),
           "files": entries}
    with open(out / "manifest.json", "w") as fh:
        json.dump(man, fh, indent=1)


def _g(x) -> str:
    return "NA" if x is None or not np.isfinite(x) else f"{x:.6g}"


def _panel_csv(path, ds: Dataset, **panels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["station_id", "date", *panels])
        for i, s in enumerate(ds.stations):
            for t, d in enumerate(ds.dates):
                w.writerow([s.id, str(d), *[_g(p[i, t]) for p in panels.values()]])


def save_model(fit, out: Path, input_path: str | None) -> list:
    if fit.name == "rfstk":
        files = fit.save(out)
        meta = json.loads((out / "model.json").read_text())
        meta["input"] = input_path
        (out / "model.json").write_text(json.dumps(meta, indent=1))
        return files
    d = fit.to_dict()
    d["input"] = input_path
    (out / "model.json").write_text(json.dumps(d, indent=1))
    return [out / "model.json"]


def load_model(path, ds: Dataset | None = None):
    """Load a fitted model from ``model.json`` or the directory holding it."""
    from .evaluation import BaselineFit
    from .gamm import GammFit
    from .hdgm import HdgmFit
    from .rfstk import RfstkFit

    p = Path(path)
    d = p if p.is_dir() else p.parent
    mj = d / "model.json" if p.is_dir() else p
    if not mj.is_file():
        raise UsageError(f"model file not found: {mj}")
    meta = json.loads(mj.read_text())
    kind = meta.get("model")
    if kind == "rfstk":
        return RfstkFit.from_dict(meta, np.load(d / "forest.npy", allow_pickle=False)), meta
    if kind == "gamm":
        return GammFit.from_dict(meta), meta
    if kind == "baseline-mean":
        return BaselineFit(np.asarray(meta["day_mean"]), np.datetime64(meta["start_date"], "D")), meta
    if kind == "hdgm":
        if ds is None:
            if not meta.get("input"):
                raise UsageError("HDGM model needs its training data (--train)")
            ds = _read_dataset(meta["input"])
        return HdgmFit.from_dict(meta, ds), meta
    raise UsageError(f"unrecognised model file {mj}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args, out: Path) -> list:
    from .hdgm import HdgmParams
    from .simulate import SimConfig, inject_missingness, simulate_hdgm, make_beta

    spec = DEFAULT_LINEAR_SPEC
    beta = make_beta(spec, args.intercept, SIM_EFFECTS)
    params = HdgmParams(beta, args.g, args.theta, args.v, args.sigma2)
    try:
        params.validate()
    except PmspatioError as exc:
        raise UsageError(str(exc)) from exc
    res = simulate_hdgm(SimConfig(params, spec, T=args.days, n_stations=args.stations,
                                  covariate_generator=args.covariates, seed=args.seed))
    ds = res.dataset
    if args.missing > 0:
        ds = inject_missingness(ds, args.missing, args.missing_pattern, args.seed)
    write_csv(ds, out / "data.csv")
    truth = {"params": params.to_dict(), "labels": list(_labels(spec)), "seed": args.seed}
    (out / "truth.json").write_text(json.dumps(truth, indent=1))
    return [out / "data.csv", out / "truth.json"]


def _labels(spec):
    from .data import MONTH_LABELS
    return ["(Intercept)", *(MONTH_LABELS if spec.include_month_dummies else ()), *spec.covariates]


def _insample_rows(fit, ds: Dataset, n_params: int):
    from .evaluation import adjusted_r2, metrics
    ls, fm = fit.in_sample(ds)
    rows = []
    for name, pred in (("LS", ls), ("FM", fm)):
        m = metrics(ds.response.ravel(), np.asarray(pred).ravel())
        rows.append((name, m, adjusted_r2(m.r2, m.n, n_params)))
    return rows


def cmd_fit(args, out: Path) -> list:
    from .interpret import coefficient_report

    ds = _read_dataset(args.input)
    spec = _spec(args, ds, args.model)
    cfg = _model_config(args)
    fit = _run(lambda: cfg.fit(ds, spec))
    files = save_model(fit, out, str(Path(args.input).resolve()))
    k = len(_labels(spec)) - 1
    with open(out / "insample_metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "mse", "rmse", "mae", "r2", "adj_r2", "n"])
        for name, m, adj in _run(lambda: _insample_rows(fit, ds, k)):
            w.writerow([name, _g(m.mse), _g(m.rmse), _g(m.mae), _g(m.r2), _g(adj), m.n])
    files.append(out / "insample_metrics.csv")
    if args.model in ("hdgm", "gamm"):
        coefficient_report(fit).to_csv(out / "coefficients.csv")
        files.append(out / "coefficients.csv")
    if args.model == "gamm":
        files += _gamm_curves(fit, ds, out, args.svg)
    if args.model == "rfstk":
        imp = _run(lambda: fit.importance(ds, n_repeat=1, seed=args.seed))
        imp.to_csv(out / "importance.csv")
        files.append(out / "importance.csv")
        if fit.variogram is not None:
            fit.variogram.to_csv(out / "residual_variogram.csv")
            files.append(out / "residual_variogram.csv")
        if args.svg:
            from .plotting import importance_figure
            importance_figure(imp, out / "importance.svg")
            files.append(out / "importance.svg")
    return files


def _gamm_curves(fit, ds: Dataset, out: Path, svg: bool) -> list:
    files = []
    for b in fit.bases:
        x = ds.covariates[b.covariate]
        grid = np.linspace(float(x.min()), float(x.max()), 100)
        f, lo, hi = fit.curve(b.covariate, grid)
        path = out / f"smooth_{b.covariate}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "fitted", "lower95", "upper95"])
            for row in zip(grid, f, lo, hi):
                w.writerow([_g(v) for v in row])
        files.append(path)
        if svg:
            from .plotting import curve_figure
            curve_figure(grid, f, lo, hi, b.covariate, out / f"smooth_{b.covariate}.svg")
            files.append(out / f"smooth_{b.covariate}.svg")
    return files


def cmd_predict(args, out: Path) -> list:
    train = _read_dataset(args.train) if args.train else None
    fit, _ = load_model(args.model_path, train)
    target = _read_dataset(args.input)
    pred = _run(lambda: fit.predict(target))
    ls = _run(lambda: fit.predict_large_scale(target))
    _panel_csv(out / "predictions.csv", target, predicted=np.asarray(pred), large_scale=np.asarray(ls))
    return [out / "predictions.csv"]


def cmd_cv(args, out: Path) -> list:
    from .evaluation import losocv

    ds = _read_dataset(args.input)
    if ds.n < 3:
        raise UsageError("cross-validation needs at least 3 stations")
    spec = _spec(args, ds, args.model)
    cfg = _model_config(args)
    validate = _csv_list(args.validate_only) or None
    exclude = _csv_list(args.exclude)
    for s in (validate or []) + exclude:
        if s not in ds.station_ids:
            raise UsageError(f"unknown station id {s!r}")
    if args.model == "rfstk" and args.threads > 1:
        cfg.threads = 1      # parallelism goes to folds
    rep = losocv(ds, cfg, spec, validate, exclude, threads=args.threads)
    if all(f.failed for f in rep.folds):
        raise RuntimeError("every fold failed: " + "; ".join(f.error for f in rep.folds))
    files = [out / "cv_per_station.csv", out / "cv_summary.csv", out / "cv_pooled.json",
             out / "cv_moving_average.csv"]
    rep.to_per_station_csv(files[0])
    rep.to_summary_csv(files[1])
    rep.to_pooled_json(files[2])
    rep.to_moving_average_csv(files[3])
    for f in rep.folds:
        if f.failed:
            print(f"fold {f.station_id} failed: {f.error}", file=sys.stderr)
    if args.svg:
        from .plotting import moving_average_figure, rmse_figure
        moving_average_figure(rep, out / "cv_moving_average.svg")
        rmse_figure(rep, out / "cv_rmse.svg")
        files += [out / "cv_moving_average.svg", out / "cv_rmse.svg"]
    return files


def cmd_variogram(args, out: Path) -> list:
    from .variogram import empirical_variogram, fit_separable

    ds = _read_dataset(args.input)
    vg = _run(lambda: empirical_variogram(ds.response, ds.stations, args.bins, args.max_lag))
    vg.to_csv(out / "variogram.csv")
    files = [out / "variogram.csv"]
    fitted = None
    if args.fit:
        fitted = _run(lambda: fit_separable(vg))
        (out / "variogram_fit.json").write_text(json.dumps(fitted.to_dict(), indent=1))
        files.append(out / "variogram_fit.json")
    if args.svg:
        from .plotting import variogram_figure
        variogram_figure(vg, out / "variogram.svg", fitted=fitted)
        files.append(out / "variogram.svg")
    return files


def cmd_diagnose(args, out: Path) -> list:
    from .evaluation import residual_diagnostics

    ds = _read_dataset(args.input)
    fit, _ = load_model(args.model_path, ds)
    _, fm = _run(lambda: fit.in_sample(ds))
    resid = ds.response - np.asarray(fm)
    diag = _run(lambda: residual_diagnostics(resid, ds.stations, ds.dates, args.max_lag))
    files = [out / "monthly_sd.csv", out / "acf.csv"]
    diag.monthly_csv(files[0])
    diag.acf_csv(files[1])
    if diag.residual_variogram is not None:
        diag.residual_variogram.to_csv(out / "residual_variogram.csv")
        files.append(out / "residual_variogram.csv")
    if args.svg:
        from .plotting import acf_figure, monthly_sd_figure, variogram_figure
        monthly_sd_figure(diag.monthly_sd, out / "monthly_sd.svg")
        acf_figure(diag.acf, out / "acf.svg")
        files += [out / "monthly_sd.svg", out / "acf.svg"]
        if diag.residual_variogram is not None:
            variogram_figure(diag.residual_variogram, out / "residual_variogram.svg")
            files.append(out / "residual_variogram.svg")
    return files


def cmd_pdp(args, out: Path) -> list:
    from .interpret import pdp, write_season_samples

    fit, meta = load_model(args.model_path, _read_dataset(args.input) if args.input else None)
    src = args.input or meta.get("input")
    if not src:
        raise UsageError("no data: pass --input")
    ds = _read_dataset(src)
    variables = _csv_list(args.variable)
    files = []
    for v in variables:
        if v not in fit.spec.covariates:
            raise UsageError(f"variable {v!r} is not a model covariate")
        curve = _run(lambda: pdp(fit, ds, v, args.grid_size, args.max_rows, args.seed))
        curve.to_csv(out / f"pdp_{v}.csv")
        files.append(out / f"pdp_{v}.csv")
        if args.season_samples:
            write_season_samples(ds, v, out / f"season_{v}.csv")
            files.append(out / f"season_{v}.csv")
        if args.svg:
            from .plotting import pdp_figure
            pdp_figure(curve, out / f"pdp_{v}.svg")
            files.append(out / f"pdp_{v}.svg")
    return files


def cmd_importance(args, out: Path) -> list:
    fit, meta = load_model(args.model_path)
    if getattr(fit, "name", "") != "rfstk":
        raise UsageError("importance needs an rfstk model")
    src = args.input or meta.get("input")
    if not src:
        raise UsageError("no data: pass --input")
    ds = _read_dataset(src)
    imp = _run(lambda: fit.importance(ds, args.repeats, args.seed))
    imp.to_csv(out / "importance.csv")
    files = [out / "importance.csv"]
    if args.svg:
        from .plotting import importance_figure
        importance_figure(imp, out / "importance.svg")
        files.append(out / "importance.svg")
    return files


class _Runtime(Exception):
    pass


def _run(fn):
    """Run a computation, tagging any failure as a runtime error (exit 3)."""
    try:
        return fn()
    except (UsageError, _Runtime):
        raise
    except Exception as exc:
        raise _Runtime(f"{type(exc).__name__}: {exc}") from exc


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common(p, seed=True):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="TOML file with option defaults")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--svg", action="store_true", help="also render SVG figures")
    if seed:
        p.add_argument("--seed", type=int, default=0)


def _spec_opts(p):
    p.add_argument("--linear", help="comma-separated linear covariates")
    p.add_argument("--smooth", help="comma-separated smooth covariates (gamm)")
    p.add_argument("--no-month-dummies", action="store_true")


def _model_opts(p):
    p.add_argument("--model", required=True, help="|".join(MODELS))
    g = p.add_argument_group("model options")
    g.add_argument("--tol", type=float)
    g.add_argument("--max-iter", type=int)
    g.add_argument("--k", type=int, help="gamm: knots per smooth")
    g.add_argument("--theta-gamm", type=float, help="gamm: spatial range in degrees")
    g.add_argument("--theta-search", action="store_true", help="gamm: profile GCV over the range")
    g.add_argument("--own-lag", action="store_true", help="gamm: use the target's own lagged response")
    g.add_argument("--n-tree", type=int)
    g.add_argument("--mtry", type=int)
    g.add_argument("--min-leaf", type=int)
    g.add_argument("--no-bootstrap", action="store_true")
    g.add_argument("--neighbors", type=int, help="rfstk: kriging neighbourhood size")
    g.add_argument("--vg-max-lag", type=int, help="rfstk: residual variogram max lag")
    g.add_argument("--vg-bins", type=int, help="rfstk: residual variogram distance bins")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pmspatio", description="Spatiotemporal PM2.5 models")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a station-day panel")
    _common(p)
    p.add_argument("--stations", type=int, default=20)
    p.add_argument("--days", type=int, default=365)
    p.add_argument("--g", type=float, default=0.72)
    p.add_argument("--theta", type=float, default=0.79)
    p.add_argument("--v", type=float, default=3.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--intercept", type=float, default=40.0)
    p.add_argument("--covariates", default="iid-normal", choices=("iid-normal", "seasonal-sine"))
    p.add_argument("--missing", type=float, default=0.0)
    p.add_argument("--missing-pattern", default="random", choices=("random", "block"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a model and report in-sample metrics")
    _common(p)
    p.add_argument("--input", required=True)
    _model_opts(p)
    _spec_opts(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict at the stations of a CSV")
    _common(p)
    p.add_argument("--model", dest="model_path", required=True, help="model.json or its directory")
    p.add_argument("--input", required=True)
    p.add_argument("--train", help="training CSV (HDGM only; defaults to the path stored in the model)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="leave-one-station-out cross-validation")
    _common(p)
    p.add_argument("--input", required=True)
    _model_opts(p)
    _spec_opts(p)
    p.add_argument("--validate-only", help="comma-separated station ids")
    p.add_argument("--exclude", help="comma-separated station ids removed from training and validation")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("variogram", help="empirical space-time variogram of the response")
    _common(p, seed=False)
    p.add_argument("--input", required=True)
    p.add_argument("--max-lag", type=int, default=14)
    p.add_argument("--bins", type=int, default=12)
    p.add_argument("--fit", action="store_true", help="also fit the separable exponential model")
    p.set_defaults(func=cmd_variogram)

    p = sub.add_parser("diagnose", help="residual diagnostics of a fitted model")
    _common(p, seed=False)
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--max-lag", type=int, default=14)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("pdp", help="partial dependence of the large-scale component")
    _common(p)
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--variable", required=True, help="one or more comma-separated covariates")
    p.add_argument("--input", help="data for averaging (defaults to the training CSV)")
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--max-rows", type=int, default=5000)
    p.add_argument("--season-samples", action="store_true", help="export (x, y, season) samples")
    p.set_defaults(func=cmd_pdp)

    p = sub.add_parser("importance", help="permutation importance of an rfstk forest")
    _common(p)
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--input")
    p.add_argument("--repeats", type=int, default=1)
    p.set_defaults(func=cmd_importance)
    return ap


def _apply_toml(ap: argparse.ArgumentParser, argv) -> None:
    """Load ``--config`` into subparser defaults so explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    path = Path(known.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        conf = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"bad TOML in {path}: {exc}") from exc
    cmd = next((a for a in argv if not a.startswith("-")), None)
    sub = next(a for a in ap._actions if isinstance(a, argparse._SubParsersAction))
    if cmd not in sub.choices:
        return
    sp = sub.choices[cmd]
    dests = {a.dest for a in sp._actions}
    values = {}
    for k, v in conf.items():
        dest = k.replace("-", "_")
        if dest == "model" and "model_path" in dests:
            dest = "model_path"
        if dest not in dests:
            raise UsageError(f"unknown option {k!r} in {path}")
        if isinstance(v, list):
            v = ",".join(map(str, v))
        values[dest] = v
    sp.set_defaults(**values)
    for a in sp._actions:
        if a.dest in values:
            a.required = False


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        _apply_toml(ap, argv)
        args = ap.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            files = args.func(args, out)
        _write_manifest(out, args, files)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (_Runtime, PmspatioError, RuntimeError, ValueError) as exc:
        if isinstance(exc, (UnknownCovariate, UnknownVariable)):
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
