import csv
import json

import numpy as np
import pytest

from pmspatio.cli import main
from pmspatio.data import load_csv, Schema, write_csv
from pmspatio.variogram import empirical_variogram

from conftest import XSPEC, sim


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    ds = sim(n=5, T=60, seed=21, spec=XSPEC).dataset
    write_csv(ds, d / "data.csv")
    return d / "data.csv"


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _run(*argv):
    return main([str(a) for a in argv])


def test_fit_hdgm_writes_model_and_metrics(data_csv, tmp_path):
    assert _run("fit", "--model", "hdgm", "--input", data_csv, "--linear", "x1,x2,x3", "--max-iter", 20,
                "--out", tmp_path) == 0
    meta = json.loads((tmp_path / "model.json").read_text())
    assert meta["model"] == "hdgm"
    rows = _read(tmp_path / "insample_metrics.csv")
    assert [r["component"] for r in rows] == ["LS", "FM"]
    assert float(rows[1]["r2"]) > float(rows[0]["r2"])
    names = {e["file"] for e in json.loads((tmp_path / "manifest.json").read_text())["files"]}
    assert {"model.json", "insample_metrics.csv", "coefficients.csv"} <= names


def test_rfstk_seeded_runs_are_byte_identical(data_csv, tmp_path):
    for k in ("a", "b"):
        assert _run("fit", "--model", "rfstk", "--input", data_csv, "--n-tree", 15, "--seed", 7,
                    "--out", tmp_path / k) == 0
    for f in ("model.json", "forest.npy", "insample_metrics.csv", "importance.csv", "manifest.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_cv_validate_only_and_exclude(data_csv, tmp_path):
    ds = load_csv(data_csv, Schema.with_covariates(["x1", "x2", "x3"]))
    ids = ds.station_ids
    assert _run("cv", "--model", "baseline-mean", "--input", data_csv, "--validate-only", f"{ids[0]},{ids[1]}",
                "--exclude", ids[4], "--out", tmp_path) == 0
    summary = _read(tmp_path / "cv_summary.csv")
    assert [r["station_id"] for r in summary] == ids[:2]
    # hand computation: mean of the other non-excluded stations, same day
    errs = []
    for i in (0, 1):
        others = [j for j in range(4) if j != i]
        errs.append(ds.response[i] - ds.response[others].mean(axis=0))
    pooled = json.loads((tmp_path / "cv_pooled.json").read_text())["pooled"]
    assert pooled["mse"] == pytest.approx(float(np.mean(np.concatenate(errs) ** 2)), rel=1e-12)
    assert pooled["n"] == 120


def test_simulate_then_fit(tmp_path):
    assert _run("simulate", "--stations", 4, "--days", 40, "--seed", 3, "--out", tmp_path / "sim") == 0
    truth = json.loads((tmp_path / "sim" / "truth.json").read_text())
    assert truth["params"]["g"] == 0.72
    assert _run("fit", "--model", "gamm", "--input", tmp_path / "sim" / "data.csv", "--k", 5,
                "--out", tmp_path / "fit") == 0
    assert (tmp_path / "fit" / "smooth_WE_temp_2m.csv").is_file()


def test_pdp_command(data_csv, tmp_path):
    assert _run("fit", "--model", "rfstk", "--input", data_csv, "--n-tree", 10, "--out", tmp_path / "m") == 0
    assert _run("pdp", "--model", tmp_path / "m", "--variable", "x1", "--out", tmp_path / "p") == 0
    rows = _read(tmp_path / "p" / "pdp_x1.csv")
    assert len(rows) == 50 and rows[0]["variable"] == "x1"


def test_variogram_command_matches_module(data_csv, tmp_path):
    assert _run("variogram", "--input", data_csv, "--bins", 6, "--max-lag", 4, "--out", tmp_path) == 0
    ds = load_csv(data_csv, Schema.with_covariates(["x1", "x2", "x3"]))
    vg = empirical_variogram(ds.response, ds.stations, 6, 4)
    vg.to_csv(tmp_path / "direct.csv")
    assert (tmp_path / "variogram.csv").read_bytes() == (tmp_path / "direct.csv").read_bytes()


def test_manifest_hash_semantics(data_csv, tmp_path):
    base = ["variogram", "--input", data_csv, "--bins", 6]
    _run(*base, "--out", tmp_path / "a")
    _run(*base, "--threads", 3, "--out", tmp_path / "b")
    _run(*base, "--max-lag", 5, "--out", tmp_path / "c")
    h = {k: json.loads((tmp_path / k / "manifest.json").read_text()) for k in "abc"}
    assert h["a"]["config_hash"] == h["b"]["config_hash"] != h["c"]["config_hash"]
    import hashlib
    for e in h["a"]["files"]:
        assert hashlib.sha256((tmp_path / "a" / e["file"]).read_bytes()).hexdigest() == e["sha256"]


def test_toml_defaults_and_override(data_csv, tmp_path):
    (tmp_path / "c.toml").write_text("bins = 3\nmax-lag = 2\n")
    _run("variogram", "--input", data_csv, "--config", tmp_path / "c.toml", "--out", tmp_path / "a")
    _run("variogram", "--input", data_csv, "--config", tmp_path / "c.toml", "--bins", 4, "--out", tmp_path / "b")
    assert len(_read(tmp_path / "a" / "variogram.csv")) == 3 * 3
    assert len(_read(tmp_path / "b" / "variogram.csv")) == 4 * 3
    (tmp_path / "bad.toml").write_text("nonsense = 1\n")
    assert _run("variogram", "--input", data_csv, "--config", tmp_path / "bad.toml", "--out", tmp_path / "c") == 2


def test_exit_codes(data_csv, tmp_path):
    assert _run("fit", "--model", "nope", "--input", data_csv, "--out", tmp_path) == 2
    assert _run("fit", "--model", "hdgm", "--input", tmp_path / "missing.csv", "--out", tmp_path) == 2
    assert _run("fit", "--model", "hdgm", "--input", data_csv, "--n-tree", 5, "--out", tmp_path) == 2
    assert _run("fit", "--model", "hdgm", "--input", data_csv, "--linear", "zzz", "--out", tmp_path) == 2
    assert _run("bogus") == 2
    # a model whose covariates the target lacks fails at prediction time
    assert _run("fit", "--model", "rfstk", "--input", data_csv, "--n-tree", 5, "--out", tmp_path / "m") == 0
    ds = load_csv(data_csv, Schema.with_covariates(["x1", "x2", "x3"]))
    from pmspatio.data import Dataset
    bare = Dataset(ds.stations, ds.dates, ds.response, {"x1": ds.covariates["x1"]})
    write_csv(bare, tmp_path / "bare.csv")
    assert _run("predict", "--model", tmp_path / "m", "--input", tmp_path / "bare.csv", "--out", tmp_path / "p") == 3


def test_svg_reports_are_deterministic(data_csv, tmp_path):
    for k in ("a", "b"):
        assert _run("cv", "--model", "baseline-mean", "--input", data_csv, "--svg", "--out", tmp_path / k) == 0
        assert _run("variogram", "--input", data_csv, "--fit", "--svg", "--out", tmp_path / k) == 0
    for f in ("cv_rmse.svg", "cv_moving_average.svg", "variogram.svg"):
        a = (tmp_path / "a" / f).read_bytes()
        assert a.startswith(b"<?xml") and a == (tmp_path / "b" / f).read_bytes()
