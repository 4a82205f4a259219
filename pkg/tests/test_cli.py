import csv
import math

import numpy as np
import pytest

from svmpi import cli
from svmpi.report import Report, parse_text

GRID = ["--c-grid", "0.5,2", "--width-grid", "0.5,2"]


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def report(prefix):
    return parse_text(open(f"{prefix}.report.txt").read())


@pytest.fixture(scope="module")
def ad1(tmp_path_factory):
    """AD1 training, validation and test files written through the CLI."""
    d = tmp_path_factory.mktemp("ad1")
    for name, m, seed in (("train", 200, 1), ("val", 200, 2), ("test", 500, 3)):
        assert cli.main(["generate", "--ad", "AD1", "--m", str(m), "--seed", str(seed),
                         "--out", str(d / f"{name}.csv")]) == 0
    return d


# --- generate -------------------------------------------------------------------

def test_generate_row_count_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "generate", "--ad", "AD1", "--m", 800, "--seed", 0, "--out", a)[0] == 0
    assert run(capsys, "generate", "--ad", "AD1", "--m", 800, "--seed", 0, "--out", b)[0] == 0
    assert len(rows(a)) == 801  # header + rows
    assert a.read_bytes() == b.read_bytes()


def test_generate_invalid_ad(tmp_path, capsys):
    code, _, err = run(capsys, "generate", "--ad", "AD9", "--m", 10, "--out", tmp_path / "x.csv")
    assert code == 2
    assert "AD9" in err
    assert not (tmp_path / "x.csv").exists()


def test_generate_missing_output_dir(tmp_path, capsys):
    code, _, err = run(capsys, "generate", "--ad", "AD1", "--m", 10, "--out", tmp_path / "no" / "x.csv")
    assert code == 2 and "does not exist" in err


# --- configuration -----------------------------------------------------------------

def test_config_precedence_and_echo(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nad = AD2\nm = 50\nseed = 4\n")
    out_file = tmp_path / "d.csv"
    code, out, _ = run(capsys, "generate", "--config", cfg, "--out", out_file)
    assert code == 0
    assert len(rows(out_file)) == 51
    assert "[config]" in out and "ad = AD2" in out and "seed = 4" in out
    code, out, _ = run(capsys, "generate", "--config", cfg, "--m", 60, "--out", out_file)
    assert code == 0
    assert len(rows(out_file)) == 61
    assert "m = 60" in out


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("ad = AD1\nm = 5\nbogus = 1\n")
    code, _, err = run(capsys, "generate", "--config", cfg, "--out", tmp_path / "x.csv")
    assert code == 2 and "bogus" in err


def test_config_bad_value_and_wrong_command(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("ad = AD1\nm = many\n")
    assert run(capsys, "generate", "--config", cfg, "--out", tmp_path / "x.csv")[0] == 2
    cfg.write_text("command = interval\nad = AD1\nm = 5\n")
    assert run(capsys, "generate", "--config", cfg, "--out", tmp_path / "x.csv")[0] == 2


def test_derived_seeds_independent_and_stable():
    a = cli.derive_seeds(7, ["x", "y"])
    assert a == cli.derive_seeds(7, ["x", "y"])
    assert a["x"] != a["y"]
    assert a != cli.derive_seeds(8, ["x", "y"])


# --- interval / evaluate -----------------------------------------------------------

def _interval(capsys, ad1, out, *extra):
    return run(capsys, "interval", "--data", ad1 / "train.csv", "--val", ad1 / "val.csv",
               "--test", ad1 / "test.csv", "--out", out, *GRID, *extra)


def test_interval_ssvqr_outputs_and_coverage(ad1, tmp_path, capsys):
    prefix = tmp_path / "iv"
    code, out, _ = _interval(capsys, ad1, prefix, "--save-model")
    assert code == 0
    bounds = rows(f"{prefix}.bounds.csv")
    assert bounds[0] == ["index", "y", "lower", "upper"]
    assert len(bounds) == 501
    rep = report(prefix)
    assert rep["config"]["method"] == "ssvqr"
    assert "root" in rep["seeds"]
    assert 0.92 <= float(rep["results"]["picp"]) <= 0.98
    assert rep["results"]["train_seconds"] == "omitted"
    assert (tmp_path / "iv.report.csv").exists() and (tmp_path / "iv.model.json").exists()

    # evaluating the saved model on the test file reproduces the metrics
    ev = tmp_path / "ev"
    assert run(capsys, "evaluate", "--model", f"{prefix}.model", "--data", ad1 / "test.csv",
               "--out", ev)[0] == 0
    assert report(ev)["results"]["picp"] == rep["results"]["picp"]
    assert report(ev)["results"]["mpiw"] == rep["results"]["mpiw"]

    # ...and so does scoring the bounds file
    eb = tmp_path / "eb"
    assert run(capsys, "evaluate", "--bounds", f"{prefix}.bounds.csv", "--coverage", 0.95,
               "--out", eb)[0] == 0
    assert report(eb)["results"]["picp"] == rep["results"]["picp"]
    assert float(report(eb)["results"]["mpiw"]) == pytest.approx(float(rep["results"]["mpiw"]), rel=1e-12)


def test_interval_reports_identical_and_config_round_trip(ad1, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _interval(capsys, ad1, a, "--method", "svqr")[0] == 0
    assert _interval(capsys, ad1, b, "--method", "svqr")[0] == 0
    text_a = open(f"{a}.report.txt").read()
    text_b = open(f"{b}.report.txt").read()
    assert text_a.replace(str(a), "") == text_b.replace(str(b), "")

    # feed the embedded config back in as a config file
    cfg = tmp_path / "replay.cfg"
    cfg.write_text("".join(f"{k} = {v}\n" for k, v in report(a)["config"].items()))
    c = tmp_path / "c"
    assert run(capsys, "interval", "--config", cfg, "--out", c)[0] == 0
    assert report(c)["results"] == report(a)["results"]
    assert report(c)["selection"] == report(a)["selection"]
    assert open(f"{c}.bounds.csv").read() == open(f"{a}.bounds.csv").read()


def test_interval_timings_flag(ad1, tmp_path, capsys):
    prefix = tmp_path / "t"
    assert _interval(capsys, ad1, prefix, "--method", "lssvr", "--timings")[0] == 0
    assert float(report(prefix)["results"]["train_seconds"]) >= 0


def test_interval_input_errors(ad1, tmp_path, capsys):
    prefix = tmp_path / "e"
    assert _interval(capsys, ad1, prefix, "--coverage", 1.5)[0] == 2
    assert _interval(capsys, ad1, prefix, "--q-bar", 0.2)[0] == 2  # q_bar + coverage > 1
    assert _interval(capsys, ad1, prefix, "--c-grid", "0,1")[0] == 2
    code, _, err = run(capsys, "interval", "--data", tmp_path / "missing.csv", "--out", prefix)
    assert code == 2 and "no such file" in err
    assert not list(tmp_path.glob("e.*"))


def test_failure_removes_partial_outputs(ad1, tmp_path, capsys, monkeypatch):
    def boom(self, prefix):
        raise OSError("disk full")

    monkeypatch.setattr(Report, "write", boom)
    prefix = tmp_path / "f"
    code, _, err = _interval(capsys, ad1, prefix, "--method", "lssvr")
    assert code == 1 and "disk full" in err
    assert not list(tmp_path.glob("f.*"))


def test_evaluate_needs_one_source(tmp_path, capsys):
    assert run(capsys, "evaluate", "--out", tmp_path / "x")[0] == 2


def test_gridsearch_writes_grid(ad1, tmp_path, capsys):
    prefix = tmp_path / "g"
    assert run(capsys, "gridsearch", "--data", ad1 / "train.csv", "--val", ad1 / "val.csv",
               "--method", "svqr", "--out", prefix, *GRID)[0] == 0
    grid = rows(f"{prefix}.grid.csv")
    assert grid[0] == ["c", "width", "val_pice", "val_mpiw", "val_picp"]
    assert len(grid) == 1 + 4
    sel = report(prefix)["selection"]
    assert [sel["c"], sel["width"]] in [[r[0], r[1]] for r in grid[1:]]


@pytest.mark.slow
def test_lssvr_pice_exceeds_ssvqr_on_chi2_noise(tmp_path, capsys):
    diffs = []
    for s in range(10):
        d = tmp_path / f"s{s}"
        d.mkdir()
        for name, m, seed in (("train", 150, s), ("val", 150, 100 + s), ("test", 300, 200 + s)):
            assert run(capsys, "generate", "--ad", "AD2", "--m", m, "--seed", seed,
                       "--out", d / f"{name}.csv")[0] == 0
        pice = {}
        for method in ("lssvr", "ssvqr"):
            assert run(capsys, "interval", "--method", method, "--data", d / "train.csv",
                       "--val", d / "val.csv", "--test", d / "test.csv", "--out", d / method,
                       *GRID)[0] == 0
            pice[method] = float(report(d / method)["results"]["pice"])
        diffs.append(pice["lssvr"] - pice["ssvqr"])
    assert np.median(diffs) > 0


# --- featsel ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def sparse_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("sp") / "sparse.csv"
    assert cli.main(["generate", "--ad", "sparse", "--m", "200", "--features", "20",
                     "--relevant", "5", "--seed", "1", "--out", str(path)]) == 0
    return path


def test_featsel_report(sparse_file, tmp_path, capsys):
    prefix = tmp_path / "fs"
    assert run(capsys, "featsel", "--data", sparse_file, "--eps-rel", 0.2, "--out", prefix)[0] == 0
    text = open(f"{prefix}.report.txt").read()
    assert "% Reduced Features" in text
    sel = report(prefix)["selection"]
    assert int(sel["n_kept"]) + int(sel["n_dropped"]) == 20
    assert float(sel["% Reduced Features"]) == pytest.approx(100 * int(sel["n_dropped"]) / 20)
    assert "[comparison]" in text
    assert len(rows(f"{prefix}.weights.csv")) == 21


def test_featsel_eps_echoed(sparse_file, tmp_path, capsys):
    prefix = tmp_path / "fe"
    code, out, _ = run(capsys, "featsel", "--data", sparse_file, "--eps", 0.05, "--out", prefix)
    assert code == 0
    assert "eps = 0.05" in out
    assert float(report(prefix)["selection"]["eps"]) == 0.05
    assert report(prefix)["config"]["eps"] == "0.05"


def test_featsel_unknown_column(sparse_file, tmp_path, capsys):
    code, _, err = run(capsys, "featsel", "--data", sparse_file, "--columns", "nope",
                       "--out", tmp_path / "fx")
    assert code == 2 and "nope" in err
    assert not list(tmp_path.glob("fx.*"))


# --- conformal --------------------------------------------------------------------

def test_conformal_fixed_seed_trials_have_zero_std(tmp_path, capsys):
    prefix = tmp_path / "cf"
    assert run(capsys, "conformal", "--ad", "AD1", "--m", 100, "--m-test", 200, "--trials", 10,
               "--seed", 3, "--out", prefix)[0] == 0
    summary = report(prefix)["summary"]
    assert float(summary["picp_std"]) == 0.0
    assert float(summary["mpiw_std"]) == 0.0
    assert summary["degenerate"] == "false"
    assert len(rows(f"{prefix}.trials.csv")) == 11


def test_conformal_resample_varies(tmp_path, capsys):
    prefix = tmp_path / "cr"
    assert run(capsys, "conformal", "--ad", "AD1", "--m", 100, "--m-test", 200, "--trials", 4,
               "--resample", "--out", prefix)[0] == 0
    assert float(report(prefix)["summary"]["picp_std"]) > 0


def test_conformal_small_calibration_degenerate(tmp_path, capsys):
    prefix = tmp_path / "cd"
    code, _, err = run(capsys, "conformal", "--ad", "AD1", "--m", 10, "--m-test", 50,
                       "--alpha", 0.1, "--out", prefix)
    assert code == 0
    assert "warning" in err and "degenerate" in err
    summary = report(prefix)["summary"]
    assert summary["degenerate"] == "true"
    assert float(summary["picp_mean"]) == 1.0
    assert math.isinf(float(summary["mpiw_mean"]))


def test_conformal_needs_one_source(tmp_path, capsys):
    assert run(capsys, "conformal", "--out", tmp_path / "c")[0] == 2


# --- forecast ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def series_file(tmp_path_factory):
    t = np.arange(240)
    y = 10 + 3 * np.sin(2 * np.pi * t / 12) + np.random.default_rng(0).normal(0, 0.5, t.size)
    path = tmp_path_factory.mktemp("fc") / "series.csv"
    path.write_text("".join(f"{float(v)!r}\n" for v in y))
    return path


def test_forecast_headerless_rows_and_columns(series_file, tmp_path, capsys):
    prefix = tmp_path / "fc"
    assert run(capsys, "forecast", "--data", series_file, "--lags", "12", "--method", "svqr",
               "--out", prefix, *GRID)[0] == 0
    rep = report(prefix)
    out = rows(f"{prefix}.forecast.csv")
    assert out[0] == ["index", "y_true", "lower", "upper"]
    assert len(out) - 1 == int(rep["data"]["n_test"])
    assert int(rep["data"]["n_series"]) == 240
    for key in ("train_seconds", "sparsity_lower_pct", "sparsity_upper_pct"):
        assert key in rep["results"]


def test_forecast_bad_lags(series_file, tmp_path, capsys):
    assert run(capsys, "forecast", "--data", series_file, "--lags", "0",
               "--out", tmp_path / "fb")[0] == 2
