from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest
from scipy import stats

from dlshrink import experiments
from dlshrink.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, ConfigError, main, parse_prior
from dlshrink.experiments import (
    AGGREGATE_COLUMNS,
    CSV_COLUMNS,
    ExperimentConfig,
    aggregate,
    parse_method,
    run_experiment,
    split,
)
from dlshrink.rngdist import InvalidParameterError

TINY = dict(design="table1", n=30, q=3, A=[5.0], methods=["BL", "DL_1/n", "HS", "LS", "PM"],
            replicates=2, n_iter=150, n_burnin=50)


def _data_rows(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# config_hash=")
    return list(csv.reader(lines[1:]))


# --- seeds and config ------------------------------------------------------------


def test_split_is_deterministic_and_distinct():
    assert split(2013, 0) == split(2013, 0)
    seeds = {split(2013, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert split(2013, 1) != split(2014, 1)
    assert all(0 <= s < 2 ** 64 for s in seeds)


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        ExperimentConfig.from_dict({"colour": "red"})
    with pytest.raises(InvalidParameterError):
        ExperimentConfig(n=10, q=11)
    with pytest.raises(InvalidParameterError):
        ExperimentConfig(methods=["ridge"])
    with pytest.raises(InvalidParameterError):
        ExperimentConfig(n_iter=100, n_burnin=100)
    with pytest.raises(InvalidParameterError):
        ExperimentConfig(base_seed=-1)
    cfg = ExperimentConfig.from_dict({}, experiments.TABLE1_DEFAULTS)
    assert (cfg.n, cfg.q, cfg.A, cfg.replicates) == (100, 5, [7.0], 20)


def test_parse_method_tags():
    assert parse_method("DL_1/2").resolve_a(10) == pytest.approx(0.5)
    assert parse_method("DL_1/n").resolve_a(10) == pytest.approx(0.1)
    assert parse_method("PM") == "PM"
    with pytest.raises(InvalidParameterError):
        parse_method("DL_x")


def test_config_hash_ignores_output_path():
    a = ExperimentConfig(**TINY, out="a.csv")
    b = ExperimentConfig(**TINY, out="b.csv")
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != ExperimentConfig(**{**TINY, "replicates": 3}).config_hash()


def test_table2_truth_layout():
    cfg = ExperimentConfig.from_dict({"n": 200, "q": 20, "A": [3.0]}, experiments.TABLE2_DEFAULTS)
    v = cfg.truth(3.0).to_vector()
    assert np.count_nonzero(v == 10.0) == 10 and np.count_nonzero(v == 3.0) == 10
    assert np.count_nonzero(v) == 20


# --- experiment runs --------------------------------------------------------------


def test_tiny_table1_is_byte_identical_across_workers_and_reruns(tmp_path):
    outs = []
    for k, workers in enumerate((1, 2, 1)):
        path = tmp_path / f"run{k}.csv"
        rc = main(["replicate-table1", "--config", _write_cfg(tmp_path, TINY), "--workers", str(workers),
                   "--out", str(path)])
        assert rc == EXIT_OK
        outs.append((path.read_bytes(), path.with_suffix("").with_name(f"run{k}.aggregate.csv").read_bytes()))
    assert outs[0] == outs[1] == outs[2]
    rows = _data_rows(tmp_path / "run0.csv")
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) - 1 == 2 * 5
    assert all(r[6] == "NA" for r in rows[1:])
    agg = _data_rows(tmp_path / "run0.aggregate.csv")
    assert tuple(agg[0]) == AGGREGATE_COLUMNS


def _write_cfg(tmp_path, d):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(d))
    return str(p)


def test_timing_goes_to_sidecar(tmp_path):
    path = tmp_path / "t.csv"
    cfg = {**TINY, "methods": ["LS"], "replicates": 1}
    assert main(["replicate-table1", "--config", _write_cfg(tmp_path, cfg), "--out", str(path)]) == EXIT_OK
    side = _data_rows(tmp_path / "t.timing.csv")
    assert side[0] == ["method", "A", "replicate", "seconds"] and float(side[1][3]) >= 0
    assert main(["replicate-table1", "--config", _write_cfg(tmp_path, cfg), "--out", str(path),
                 "--timing"]) == EXIT_OK
    assert _data_rows(path)[1][6] != "NA"


def test_zero_signal_lasso_error_is_small():
    cfg = ExperimentConfig(**{**TINY, "A": [0.0], "q": 0, "methods": ["LS"], "replicates": 5, "n": 200})
    rows, failures = run_experiment(cfg)
    assert not failures
    # the universal threshold kills pure noise with high probability
    assert np.mean([r.sq_error for r in rows]) < 2.0


def test_table2_scaled_ordering_dirichlet_half_beats_one_over_n():
    cfg = ExperimentConfig.from_dict({"n": 200, "q": 20, "A": [3.0], "replicates": 3,
                                      "methods": ["DL_1/n", "DL_1/2"], "n_iter": 800, "n_burnin": 300},
                                     experiments.TABLE2_DEFAULTS)
    rows, failures = run_experiment(cfg)
    assert not failures
    agg = {a["method"]: a["mean_sq_error"] for a in aggregate(rows, cfg)}
    assert agg["DL_1/2"] < agg["DL_1/n"]


def test_failed_fit_is_recorded_without_abort(tmp_path, monkeypatch):
    real = experiments._fit_one

    def flaky(tag, *args):
        if tag == "HS":
            raise FloatingPointError("synthetic")
        return real(tag, *args)

    monkeypatch.setattr(experiments, "_fit_one", flaky)
    cfg = ExperimentConfig(**{**TINY, "methods": ["LS", "HS", "PM"]})
    rows, failures = run_experiment(cfg)
    assert {r.method for r in rows} == {"LS", "PM"} and len(rows) == 4
    assert len(failures) == 2 and all(f["method"] == "HS" for f in failures)
    paths = experiments.write_outputs(rows, failures, cfg, tmp_path / "f.csv")
    summary = json.loads(open(paths["summary"]).read())
    assert summary["failures"][0]["error"] == "FloatingPointError: synthetic"
    hs = [a for a in summary["aggregate"] if a["method"] == "HS"][0]
    assert hs["replicates"] == 0 and hs["mean_sq_error"] is None


def test_replicate_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"replicates": 1, "shrinkage": 3}))
    assert main(["replicate-table1", "--config", str(bad)]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err
    bad.write_text("{not json")
    assert main(["replicate-table1", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["replicate-table2", "--methods", "BL,ridge"]) == EXIT_CONFIG
    assert main(["no-such-command"]) == EXIT_CONFIG


# --- concentration ------------------------------------------------------------------


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_concentration_exact_iid_matches_chi_square(capsys):
    assert main(["concentration", "--prior", "iid_normal", "--n", "10", "--q", "0",
                 "--t", str(math.sqrt(10)), "--estimator", "exact"]) == EXIT_OK
    rep = _json_out(capsys)
    assert rep["estimate"]["log_prob"] == pytest.approx(stats.chi2(10).logcdf(10.0), abs=1e-12)
    assert len(rep["config_hash"]) > 0


def test_concentration_mc_contains_exact(capsys):
    assert main(["concentration", "--prior", "iid_normal", "--n", "10", "--q", "0", "--t", str(math.sqrt(10)),
                 "--n-samples", "100000", "--seed", "3"]) == EXIT_OK
    est = _json_out(capsys)["estimate"]
    assert est["ci_low"] <= stats.chi2(10).logcdf(10.0) <= est["ci_high"]


def test_concentration_empty_ball(capsys):
    assert main(["concentration", "--prior", "dl", "--n", "10", "--t", "0"]) == EXIT_OK
    est = _json_out(capsys)["estimate"]
    assert est["log_prob"] == "-inf" and "empty_ball" in est["flags"]


def test_concentration_compare_ratio(capsys):
    assert main(["concentration", "--prior", "dl", "--compare", "iid_normal", "--n", "10", "--t", "4",
                 "--n-samples", "50000", "--seed", "1"]) == EXIT_OK
    rep = _json_out(capsys)
    lr = rep["estimate"]["log_prob"] - rep["compare"]["estimate"]["log_prob"]
    assert rep["log_ratio"] == pytest.approx(lr)
    assert rep["ratio"] == pytest.approx(math.exp(lr))


def test_concentration_argument_errors(capsys):
    assert main(["concentration", "--prior", "dl", "--n", "10", "--t", "1", "--delta", "0.5"]) == EXIT_CONFIG
    assert main(["concentration", "--prior", "ridge", "--n", "10"]) == EXIT_CONFIG
    assert main(["concentration", "--prior", "dl", "--n", "10", "--estimator", "exact"]) == EXIT_CONFIG


def test_parse_prior_tags():
    assert parse_prior("dl:0.25").resolve_a(10) == pytest.approx(0.25)
    with pytest.raises(ConfigError):
        parse_prior("dl:abc")


# --- fit and sample-prior --------------------------------------------------------------


def test_fit_command(tmp_path, capsys):
    y = tmp_path / "y.csv"
    truth = tmp_path / "truth.csv"
    y.write_text("y\n6.0\n0.1\n-0.3\n")
    truth.write_text("6.0\n0\n0\n")
    assert main(["fit", "--y", str(y), "--truth", str(truth), "--method", "HS", "--n-iter", "600",
                 "--n-burnin", "200", "--seed", "4"]) == EXIT_OK
    rep = _json_out(capsys)
    med = rep["posterior_median"]
    assert len(med) == 3 and 4.5 < med[0] < 7.0 and abs(med[1]) < 0.5
    assert rep["squared_error"] == pytest.approx(sum((m - t) ** 2 for m, t in zip(med, [6, 0, 0])))
    assert rep["kept_draws"] == 400
    assert main(["fit", "--y", str(y), "--method", "PM"]) == EXIT_OK
    assert _json_out(capsys)["squared_error"] is None
    assert main(["fit", "--y", str(tmp_path / "missing.csv")]) == EXIT_CONFIG


def test_sample_prior_command(tmp_path):
    out = tmp_path / "draws.csv"
    assert main(["sample-prior", "--prior", "hs", "--n", "4", "--draws", "50", "--seed", "2",
                 "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# config_hash=") and "seed=2" in lines[0]
    assert lines[1] == "theta1,theta2,theta3,theta4"
    vals = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
    assert vals.shape == (50, 4) and np.all(np.isfinite(vals))
    again = tmp_path / "again.csv"
    main(["sample-prior", "--prior", "hs", "--n", "4", "--draws", "50", "--seed", "2", "--out", str(again)])
    assert again.read_bytes() == out.read_bytes()


# --- verify-math ---------------------------------------------------------------------


def test_verify_math_exit_codes(tmp_path, capsys):
    out = tmp_path / "v.json"
    # the suite contains claims that are false, so the honest default run is red
    assert main(["verify-math", "--n-points", "100000", "--out", str(out)]) == EXIT_FAIL
    err = capsys.readouterr().err
    assert "FAILED erfc_lower_bound" in err and "FAILED dirichlet_formula" not in err
    body = json.loads(out.read_text())
    assert body["perturb"] is None and len(body["checks"]) > 30
    assert main(["verify-math", "--n-points", "100000", "--perturb", "dickey_integral",
                 "--out", str(out)]) == EXIT_FAIL
    assert "FAILED dickey_integral" in capsys.readouterr().err
