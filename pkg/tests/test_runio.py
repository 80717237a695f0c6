import json
import math
import os

import numpy as np
import pytest

from paretolab import (
    ConfigError,
    DomainError,
    InsufficientDataError,
    ExperimentReport,
    emit_plot_data,
    parse_config,
    read_timeseries,
    sample_pareto,
    write_summary,
    write_timeseries,
)
from paretolab.cli import main
from paretolab.runio import CSV_HEADER, read_samples


MINIMAL = '{"experiment": "baseline", "engine": "kesten", "n_agents": 1000, "seed": 42}'


# -- config parsing ---------------------------------------------------------


def test_minimal_config_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.experiment == "baseline"
    assert cfg.stride == 100
    assert cfg.kesten["alpha_target"] == 1.5
    assert cfg.channel["redistribution"] == "ProportionalToWealth"
    assert cfg.resolved["thermalization"]["coupling"] == 10000


def test_digest_stable_and_complete():
    a = parse_config(MINIMAL)
    b = parse_config(MINIMAL)
    assert a.digest == b.digest
    c = parse_config(MINIMAL.replace("42", "43"))
    assert c.digest != a.digest
    # the output location does not change what the run computes
    d = parse_config(
        '{"experiment": "baseline", "seed": 42, "output_dir": "/tmp/x"}')
    e = parse_config('{"experiment": "baseline", "seed": 42}')
    assert d.digest == e.digest


def test_seed_override():
    cfg = parse_config(MINIMAL, seed_override=7)
    assert cfg.seed == 7
    assert cfg.digest == parse_config(MINIMAL.replace("42", "7")).digest


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        parse_config('{"experiment": "baseline", "bogus": 1}')
    with pytest.raises(ConfigError, match="kesten.typo"):
        parse_config('{"experiment": "baseline", "kesten": {"typo": 1}}')


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config('{"experiment": "baseline", "seed": 1, "seed": 2}')


def test_range_violation_names_the_path():
    with pytest.raises(ConfigError, match="kesten.alpha_target"):
        parse_config(
            '{"experiment": "baseline", "kesten": {"alpha_target": 2.5}}')
    with pytest.raises(ConfigError, match="exchange.f"):
        parse_config('{"experiment": "baseline", "exchange": {"f": 1.0}}')
    with pytest.raises(ConfigError, match="stride"):
        parse_config('{"experiment": "baseline", "stride": 0}')


def test_missing_experiment_and_bad_json():
    with pytest.raises(ConfigError, match="experiment"):
        parse_config('{"engine": "kesten"}')
    with pytest.raises(ConfigError, match="JSON"):
        parse_config('{not json')
    with pytest.raises(ConfigError):
        parse_config('[1, 2]')
    with pytest.raises(ConfigError, match="experiment"):
        parse_config('{"experiment": "warp"}')


def test_type_strictness():
    with pytest.raises(ConfigError, match="n_agents"):
        parse_config('{"experiment": "baseline", "n_agents": 10.5}')
    with pytest.raises(ConfigError, match="engine"):
        parse_config('{"experiment": "baseline", "engine": 3}')


# -- serialization ----------------------------------------------------------


def report_with_rows(rows):
    return ExperimentReport("baseline", "deadbeef", [1], trajectories=rows,
                            verdicts={"v": {"status": "PASS", "value": 1.0,
                                            "tolerance": "t", "replicas": 1,
                                            "note": None}})


def test_timeseries_row_count_and_roundtrip(tmp_path):
    rows = [(float(i), 2.0, 3.0, 1.5, math.nan, -1.0, math.nan, 0.3,
             math.nan) for i in range(3)]
    path = os.path.join(tmp_path, "ts.csv")
    write_timeseries(report_with_rows(rows), path)
    text = open(path, newline="").read()
    lines = text.split("\n")
    assert lines[0] == CSV_HEADER
    assert len([l for l in lines if l]) == 4  # header + 3 rows
    assert "\r" not in text
    back = read_timeseries(path)
    for got, want in zip(back, rows):
        for g, w in zip(got, want):
            assert (math.isnan(g) and math.isnan(w)) or g == w


def test_timeseries_full_precision(tmp_path):
    val = 1.0 / 3.0 + 1e-16
    rows = [(1.0, val, 3.0, 1.5, 0.0, 0.0, 0.0, 0.0, 0.0)]
    path = os.path.join(tmp_path, "ts.csv")
    write_timeseries(report_with_rows(rows), path)
    assert read_timeseries(path)[0][1] == val


def test_empty_trajectory_header_only(tmp_path):
    path = os.path.join(tmp_path, "ts.csv")
    r = report_with_rows([])
    write_timeseries(r, path)
    assert open(path).read() == CSV_HEADER + "\n"
    spath = os.path.join(tmp_path, "s.json")
    write_summary(r, spath)
    doc = json.load(open(spath))
    assert "warning" in doc


def test_summary_fields(tmp_path):
    path = os.path.join(tmp_path, "s.json")
    write_summary(report_with_rows([]), path)
    doc = json.load(open(path))
    assert doc["config_digest"] == "deadbeef"
    assert doc["seeds"] == [1]
    assert doc["verdicts"]["v"]["tolerance"] == "t"
    assert "wall_clock_utc" in doc["meta"]


# -- plot data --------------------------------------------------------------


def test_plot_data_tail_slope(tmp_path):
    rng = np.random.default_rng(2)
    x = sample_pareto(2.0, 1.0, 200_000, rng)
    cpath = os.path.join(tmp_path, "c.csv")
    hpath = os.path.join(tmp_path, "h.csv")
    emit_plot_data(x, 40, cpath, hpath)
    rows = [l.split(",") for l in open(cpath).read().splitlines()[1:]]
    v = np.array([[float(a), float(b)] for a, b in rows])
    # least squares on the log-log CCDF over one tail decade ~ -alpha
    sel = (v[:, 0] >= 3.0) & (v[:, 0] <= 30.0)
    slope = np.polyfit(np.log(v[sel, 0]), np.log(v[sel, 1]), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.1)
    hrows = open(hpath).read().splitlines()
    assert hrows[0] == "bin_center,density"
    assert len(hrows) == 41


def test_plot_data_degenerate_inputs(tmp_path):
    c, h = os.path.join(tmp_path, "c.csv"), os.path.join(tmp_path, "h.csv")
    emit_plot_data(np.full(12, 5.0), 3, c, h)
    assert len(open(c).read().splitlines()) == 2  # single CCDF step
    emit_plot_data(np.array([1.0] * 9 + [2.0]), 2, c, h)
    assert len(open(h).read().splitlines()) == 3
    with pytest.raises(DomainError):
        emit_plot_data(np.array([1.0] * 11 + [-1.0]), 2, c, h)
    with pytest.raises(InsufficientDataError):
        emit_plot_data(np.ones(5), 2, c, h)
    with pytest.raises(ConfigError):
        emit_plot_data(np.ones(12), 1, c, h)


def test_read_samples_skips_header(tmp_path):
    p = os.path.join(tmp_path, "s.csv")
    open(p, "w").write("wealth\n1.5\n2.5,junk\n")
    assert list(read_samples(p)) == [1.5, 2.5]


# -- CLI --------------------------------------------------------------------


def write_cfg(tmp_path, doc):
    p = os.path.join(tmp_path, "cfg.json")
    open(p, "w").write(json.dumps(doc))
    return p


def test_cli_run_roundtrip(tmp_path, capsys):
    p = write_cfg(tmp_path, {
        "experiment": "baseline", "engine": "kesten", "n_agents": 1000,
        "steps": 200, "burn_in": 500, "stride": 100, "seed": 5,
        "output_dir": os.path.join(tmp_path, "out")})
    assert main(["run", p]) == 0
    out = capsys.readouterr().out
    assert "config digest:" in out
    csv = os.path.join(tmp_path, "out", "baseline_timeseries.csv")
    assert len(read_timeseries(csv)) == 2
    assert json.load(open(os.path.join(tmp_path, "out",
                                       "baseline_summary.json")))


def test_cli_seed_override_changes_output(tmp_path):
    p = write_cfg(tmp_path, {
        "experiment": "baseline", "engine": "kesten", "n_agents": 500,
        "steps": 100, "burn_in": 200, "stride": 100, "seed": 5,
        "output_dir": os.path.join(tmp_path, "out")})
    assert main(["run", p]) == 0
    first = open(os.path.join(tmp_path, "out",
                              "baseline_timeseries.csv")).read()
    assert main(["run", p, "--seed", "6"]) == 0
    second = open(os.path.join(tmp_path, "out",
                               "baseline_timeseries.csv")).read()
    assert first != second


def test_cli_validation_failures(tmp_path, capsys):
    assert main(["run", os.path.join(tmp_path, "missing.json")]) == 1
    p = write_cfg(tmp_path, {"experiment": "baseline", "oops": 1})
    assert main(["run", p]) == 1
    assert "oops" in capsys.readouterr().err


def test_cli_runtime_failure(tmp_path):
    # unwritable output directory surfaces as a runtime error, not a crash
    blocker = os.path.join(tmp_path, "blocker")
    open(blocker, "w").write("")
    p = write_cfg(tmp_path, {
        "experiment": "baseline", "engine": "kesten", "n_agents": 100,
        "steps": 100, "burn_in": 100, "stride": 100,
        "output_dir": blocker})
    assert main(["run", p]) == 2


def test_cli_estimate_and_plotdata(tmp_path, capsys):
    rng = np.random.default_rng(1)
    sp = os.path.join(tmp_path, "samples.csv")
    np.savetxt(sp, sample_pareto(1.5, 1.0, 20_000, rng))
    assert main(["estimate", sp]) == 0
    out = capsys.readouterr().out
    assert "alpha_hat:" in out and "n_tail:" in out
    assert main(["plotdata", sp, "--bins", "20"]) == 0
    assert os.path.exists(os.path.join(tmp_path, "samples_ccdf.csv"))
    assert os.path.exists(os.path.join(tmp_path, "samples_hist.csv"))
    bad = os.path.join(tmp_path, "bad.csv")
    np.savetxt(bad, np.ones(4))
    assert main(["estimate", bad]) == 1
