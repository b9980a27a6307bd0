"""Config validation and the run / bench / compare command surface."""

from __future__ import annotations

import json

import pytest

import schedloop.cli as cli
from schedloop import ConfigError, PolicyError, load_config, parse_config


def write_config(tmp_path, name="cfg.json", **overrides):
    doc = {
        "tasks": "hartstone-baseline",
        "policy": "rr",
        "horizon": 20000,
        "deadline_mode": "exact",
        "idle_mode": "jump",
    }
    doc.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


# -- config parsing -----------------------------------------------------------

def test_parse_config_inline_tasks():
    cfg = parse_config({
        "tasks": [
            {"id": 1, "period": 100, "workload": 2.0},
            {"id": 2, "period": 200, "workload": 4.0, "weight": 2.0},
        ],
        "policy": {"name": "rr", "quantum": 5},
        "horizon": 400,
    })
    assert [sp.id for sp in cfg.specs] == [1, 2]
    assert cfg.policy_name == "rr"
    assert cfg.policy_params == {"quantum": 5}
    assert cfg.build_policy().quantum == 5


def test_parse_config_baseline_keyword():
    cfg = parse_config({"tasks": "hartstone-baseline", "policy": "edf"})
    assert len(cfg.specs) == 5
    assert cfg.horizon == 20000


def test_parse_config_reports_every_problem_at_once():
    with pytest.raises(ConfigError) as err:
        parse_config({"seed": -1, "horizon": 0, "mystery": True})
    message = str(err.value)
    assert "tasks: field is missing" in message
    assert "policy: field is missing" in message
    assert "seed: must be a nonnegative integer" in message
    assert "horizon: must be a positive integer" in message
    assert "mystery: unknown field" in message


def test_parse_config_rejects_unordered_ids():
    with pytest.raises(ConfigError) as err:
        parse_config({
            "tasks": [{"id": 2, "period": 100, "workload": 1.0},
                      {"id": 1, "period": 100, "workload": 1.0}],
            "policy": "rr",
        })
    assert "unique and ascending" in str(err.value)


def test_parse_config_rejects_bad_enums():
    with pytest.raises(ConfigError) as err:
        parse_config({"tasks": "hartstone-baseline", "policy": "rr",
                      "convention": "windowed", "deadline_mode": "lazy",
                      "idle_mode": "spin"})
    message = str(err.value)
    assert "convention" in message
    assert "deadline_mode" in message
    assert "idle_mode" in message


def test_load_config_io_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_cascade_config_builds_set_points_from_utilization(tmp_path):
    path = write_config(tmp_path, policy={"name": "psc-bcc",
                                          "tau_r_star": 1000})
    cfg = load_config(str(path))
    policy = cfg.build_policy()
    assert policy.name == "psc-bcc"
    assert policy.set_points.tau_r_star == 1000
    assert policy.set_points.theta_star == pytest.approx((0.2,) * 5)


# -- run ------------------------------------------------------------------------

def test_run_writes_trace_and_summary(tmp_path, capsys):
    cfg = write_config(tmp_path, policy="edf", horizon=10000)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["policy"] == "edf"
    assert summary["misses"] == 0
    assert summary["rounds"] > 0
    assert summary["end_time"] >= 10000
    printed = json.loads(capsys.readouterr().out)
    assert printed == summary
    header = (out / "trace.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header.startswith("k,t,tau_r,tau_p_1")


def test_run_policy_override(tmp_path):
    cfg = write_config(tmp_path, policy={"name": "rr", "quantum": 5})
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--policy", "edf",
                     "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["policy"] == "edf"


def test_run_seed_override_controls_noise(tmp_path):
    cfg = write_config(
        tmp_path, horizon=5000,
        disturbance={"mode": "additive-noise", "amplitude": 5})
    traces = {}
    for tag, seed in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / tag
        assert cli.main(["run", "--config", str(cfg), "--seed", seed,
                         "--out", str(out)]) == 0
        traces[tag] = (out / "trace.csv").read_text(encoding="utf-8")
    assert traces["a"] == traces["b"]
    assert traces["a"] != traces["c"]


def test_run_regulated_round_durations(tmp_path):
    cfg = write_config(
        tmp_path, policy={"name": "psc-bcc", "tau_r_star": 1000},
        horizon=200000, deadline_mode="round", convention="delayed")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["rounds"] == 200
    assert 950 < summary["mean_tau_r"] < 1050
    for share in summary["shares"].values():
        assert share == pytest.approx(0.2, abs=0.02)
    assert summary["misses"] == 0


def test_bad_config_exits_two(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"policy": "rr"}), encoding="utf-8")
    assert cli.main(["run", "--config", str(path)]) == 2
    assert "tasks: field is missing" in capsys.readouterr().err


def test_runtime_failure_exits_three(tmp_path, monkeypatch, capsys):
    cfg = write_config(tmp_path)

    def boom(*args, **kwargs):
        raise PolicyError("synthetic failure")

    monkeypatch.setattr(cli, "run_simulation", boom)
    assert cli.main(["run", "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == 3
    assert "synthetic failure" in capsys.readouterr().err


# -- compare ----------------------------------------------------------------------

def test_compare_identical_runs(tmp_path, capsys):
    cfg = write_config(tmp_path, policy={"name": "rr", "quantum": 10},
                       horizon=5000)
    for tag in ("a", "b"):
        assert cli.main(["run", "--config", str(cfg),
                         "--out", str(tmp_path / tag)]) == 0
    capsys.readouterr()
    code = cli.main(["compare", str(tmp_path / "a" / "trace.csv"),
                     str(tmp_path / "b" / "trace.csv"),
                     "--out", str(tmp_path / "cmp")])
    assert code == 0
    report = json.loads((tmp_path / "cmp" / "compare.json")
                        .read_text(encoding="utf-8"))
    assert report["divergent_rounds"] == 0
    assert report["first_divergent_round"] is None
    assert report["switch_totals"]["ratio_b_over_a"] == 1.0


def test_compare_flags_convention_shift(tmp_path, capsys):
    for tag, convention in (("a", "delayed"), ("b", "current")):
        cfg = write_config(tmp_path, name=f"{tag}.json",
                           policy={"name": "rr", "quantum": 10},
                           horizon=5000, convention=convention)
        assert cli.main(["run", "--config", str(cfg),
                         "--out", str(tmp_path / tag)]) == 0
    capsys.readouterr()
    code = cli.main(["compare", str(tmp_path / "a" / "trace.csv"),
                     str(tmp_path / "b" / "trace.csv")])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rounds"] > 0
    assert report["first_divergent_round"] == 1
    first = report["per_round"][0]
    # one reporting convention lags the other by a round: round 1 reads 0
    # under the delayed convention and the full 50-unit span under current
    assert first["k"] == 1
    assert first["d_tau_r"] == 50
    assert report["max_abs_d_tau_r"] >= 50
    assert report["switch_totals"]["ratio_b_over_a"] == 1.0


def test_compare_rejects_mismatched_traces(tmp_path, capsys):
    for tag, quantum in (("a", 1), ("b", 10)):
        cfg = write_config(tmp_path, name=f"{tag}.json",
                           policy={"name": "rr", "quantum": quantum},
                           horizon=2000)
        assert cli.main(["run", "--config", str(cfg),
                         "--out", str(tmp_path / tag)]) == 0
    capsys.readouterr()
    code = cli.main(["compare", str(tmp_path / "a" / "trace.csv"),
                     str(tmp_path / "b" / "trace.csv")])
    assert code == 2
    assert "different round counts" in capsys.readouterr().err


# -- bench ------------------------------------------------------------------------

def test_bench_single_cell(tmp_path, capsys):
    out = tmp_path / "bench"
    code = cli.main(["bench", "--policy", "rr-q10", "--tests", "3",
                     "--out", str(out)])
    assert code == 0
    csv_lines = (out / "bench.csv").read_text(encoding="utf-8").splitlines()
    assert csv_lines[0] == "policy,test,first_miss,switches_last_pass"
    assert len(csv_lines) == 2
    assert csv_lines[1].startswith("rr-q10,III,")
    report = (out / "bench.txt").read_text(encoding="utf-8")
    assert "period duration" in report
    assert "notes:" in report
    assert "deviations from the reference grid:" in report
    assert report in capsys.readouterr().out


def test_bench_accepts_roman_and_arabic_tests(tmp_path):
    out = tmp_path / "bench"
    code = cli.main(["bench", "--policy", "rr-q10", "--tests", "III,3",
                     "--out", str(out)])
    assert code == 0
    csv_lines = (out / "bench.csv").read_text(encoding="utf-8").splitlines()
    assert len(csv_lines) == 3
    assert csv_lines[1] == csv_lines[2]


def test_bench_rejects_unknown_selectors(tmp_path, capsys):
    assert cli.main(["bench", "--tests", "9",
                     "--out", str(tmp_path / "x")]) == 2
    assert cli.main(["bench", "--policy", "fifo",
                     "--out", str(tmp_path / "y")]) == 2
    err = capsys.readouterr().err
    assert "unknown test" in err
    assert "no bench policies match" in err


def test_bench_parallel_matches_serial(tmp_path):
    serial = tmp_path / "serial"
    parallel = tmp_path / "parallel"
    base = ["bench", "--policy", "rr-q5", "--tests", "3,4"]
    assert cli.main(base + ["--parallel", "false", "--out", str(serial)]) == 0
    assert cli.main(base + ["--parallel", "true", "--out", str(parallel)]) == 0
    assert ((serial / "bench.csv").read_bytes()
            == (parallel / "bench.csv").read_bytes())
    assert ((serial / "bench.txt").read_bytes()
            == (parallel / "bench.txt").read_bytes())
