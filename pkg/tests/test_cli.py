"""Scenario file handling, emission, determinism, and the report table."""

import json

import numpy as np
import pytest

from framelocal.cli import (
    RunConfig,
    ScenarioError,
    bundled_scenario_path,
    load_scenario,
    main,
    report,
    run_and_emit,
    save_scenario,
)
from framelocal.estimators import Asymptotic, FiniteTime, ReconstructionMode
from framelocal.scenarios import demo_scenario


def scenarios_equal(a, b) -> bool:
    if (a.topo.n, a.topo.edges, a.topo.directed) != (b.topo.n, b.topo.edges, b.topo.directed):
        return False
    for pa, pb in zip(a.initial_poses, b.initial_poses):
        if not np.array_equal(pa.matrix, pb.matrix):
            return False
    for ta, tb in zip(a.twists, b.twists):
        if not (np.array_equal(ta.linear, tb.linear) and np.array_equal(ta.angular, tb.angular)):
            return False
    return (
        a.law == b.law
        and (a.dt, a.t_end, a.seed, a.stride, a.reconstruction)
        == (b.dt, b.t_end, b.seed, b.stride, b.reconstruction)
    )


def test_bundled_asymptotic_matches_builder():
    s = load_scenario(bundled_scenario_path("demo_asymptotic"))
    assert s.topo.n == 4 and s.topo.directed
    assert s.topo.edges == ((1, 2), (2, 3), (3, 4), (4, 2))
    assert isinstance(s.law, Asymptotic)
    assert scenarios_equal(s, demo_scenario())


def test_bundled_finite_matches_builder():
    s = load_scenario(bundled_scenario_path("demo_finite_time"))
    assert not s.topo.directed
    assert s.law == FiniteTime(alpha=0.5, epsilon=1e-9)
    assert scenarios_equal(s, demo_scenario(law=FiniteTime(alpha=0.5)))


def test_round_trip_exact(tmp_path):
    for law in (Asymptotic(), FiniteTime(alpha=0.3, epsilon=1e-8)):
        s = demo_scenario(law=law, seed=123, dt=2e-3, stride=5)
        path = tmp_path / "s.json"
        save_scenario(s, path)
        assert scenarios_equal(load_scenario(path), s)


def test_zero_dt_rejected(tmp_path):
    path = tmp_path / "bad.json"
    doc = json.loads(bundled_scenario_path("demo_asymptotic").read_text())
    doc["integration"]["dt"] = 0.0
    path.write_text(json.dumps(doc))
    with pytest.raises(ScenarioError, match="dt"):
        load_scenario(path)


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.json"
    doc = json.loads(bundled_scenario_path("demo_asymptotic").read_text())
    doc["graph"]["weights"] = [1, 2, 3]
    path.write_text(json.dumps(doc))
    with pytest.raises(ScenarioError, match="unknown key"):
        load_scenario(path)


def test_missing_key_rejected(tmp_path):
    path = tmp_path / "bad.json"
    doc = json.loads(bundled_scenario_path("demo_asymptotic").read_text())
    del doc["agents"][0]["translation"]
    path.write_text(json.dumps(doc))
    with pytest.raises(ScenarioError, match="missing key"):
        load_scenario(path)


def test_invalid_rotation_rejected(tmp_path):
    path = tmp_path / "bad.json"
    doc = json.loads(bundled_scenario_path("demo_asymptotic").read_text())
    doc["agents"][0]["rotation"] = [[1, 0, 0], [0, 1, 0], [0, 0, 2]]
    path.write_text(json.dumps(doc))
    with pytest.raises(ScenarioError, match="agents\\[1\\]"):
        load_scenario(path)


def test_alpha_on_asymptotic_law_rejected(tmp_path):
    path = tmp_path / "bad.json"
    doc = json.loads(bundled_scenario_path("demo_asymptotic").read_text())
    doc["law"]["alpha"] = 0.5
    path.write_text(json.dumps(doc))
    with pytest.raises(ScenarioError, match="alpha"):
        load_scenario(path)


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "graph": [,]\n}')
    with pytest.raises(ScenarioError, match=":2"):
        load_scenario(path)


def test_run_and_emit_outputs(tmp_path):
    cfg = RunConfig(
        scenario_path=str(bundled_scenario_path("demo_finite_time")),
        out_dir=str(tmp_path / "out"),
        t_end=0.5,
        full_state=True,
    )
    assert run_and_emit(cfg) == 0
    out = tmp_path / "out"
    for name in ("trace.csv", "oracle.json", "summary.json", "state.csv"):
        assert (out / name).exists()
    header = (out / "trace.csv").read_text().splitlines()[0]
    assert header == (
        "t,orient_err_1,orient_err_2,orient_err_3,orient_err_4,"
        "pos_err_1_2,pos_err_1_4,pos_err_2_3,pos_err_3_4,V"
    )
    lines = (out / "trace.csv").read_text().splitlines()
    assert len(lines) == 1 + 51  # header + floor(0.5/1e-3)/10 + 1 samples
    state_lines = (out / "state.csv").read_text().splitlines()
    assert len(state_lines) == 1 + 51 * 4
    summary = json.loads((out / "summary.json").read_text())
    assert summary["law"] == "finite" and summary["lambda2"] == 2.0


def test_run_and_emit_deterministic(tmp_path):
    for d in ("a", "b"):
        cfg = RunConfig(
            scenario_path=str(bundled_scenario_path("demo_finite_time")),
            out_dir=str(tmp_path / d),
            t_end=1.0,
        )
        assert run_and_emit(cfg) == 0
    for name in ("trace.csv", "oracle.json", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_and_emit_precondition_failure(tmp_path, capsys):
    cfg = RunConfig(
        scenario_path=str(bundled_scenario_path("demo_asymptotic")),
        out_dir=str(tmp_path),
        law="finite",
    )
    assert run_and_emit(cfg) == 1
    assert "undirected" in capsys.readouterr().err


def test_cli_main_run_and_report(tmp_path, capsys):
    out = tmp_path / "run1"
    rc = main(
        [
            "run",
            "--config",
            str(bundled_scenario_path("demo_finite_time")),
            "--t-end",
            "0.5",
            "--seed",
            "3",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    capsys.readouterr()
    assert main(["report", str(out / "summary.json")]) == 0
    table = capsys.readouterr().out
    assert "finite" in table and "0.5" in table
    assert table.count("\n") == 3  # header, rule, one row


def test_bundled_scenarios_full_length(tmp_path, capsys):
    # both shipped demos, unmodified: the asymptotic run lands under 1e-3 at
    # t = 10 and the finite-time run settles inside its bound
    out_a = tmp_path / "a"
    out_f = tmp_path / "f"
    assert run_and_emit(
        RunConfig(str(bundled_scenario_path("demo_asymptotic")), out_dir=str(out_a))
    ) == 0
    assert run_and_emit(
        RunConfig(str(bundled_scenario_path("demo_finite_time")), out_dir=str(out_f))
    ) == 0
    asy = json.loads((out_a / "summary.json").read_text())
    fin = json.loads((out_f / "summary.json").read_text())
    assert asy["settling_time"] is None and asy["settling_bound"] is None
    assert asy["final_max_orientation_error"] < 1e-3
    assert asy["final_max_position_error"] < 1e-3
    assert fin["settling_time"] is not None
    assert fin["settling_time"] <= fin["settling_bound"]
    assert fin["final_max_orientation_error"] < 1e-6

    capsys.readouterr()
    assert report([str(out_a / "summary.json"), str(out_f / "summary.json")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4
    asy_row = next(l for l in lines if "asymptotic" in l)
    fin_row = next(l for l in lines if " finite " in l)
    assert " - " in asy_row  # no settling column entry for the asymptotic law
    assert f"{fin['settling_time']:.4g}" in fin_row


def test_report_missing_file(tmp_path, capsys):
    assert report([str(tmp_path / "nope.json")]) == 1
    assert "nope.json" in capsys.readouterr().err


def test_report_requires_arguments():
    with pytest.raises(SystemExit) as exc:
        main(["report"])
    assert exc.value.code == 2


def test_cli_mode_and_alpha_overrides(tmp_path):
    out = tmp_path / "o"
    rc = main(
        [
            "run",
            "--config",
            str(bundled_scenario_path("demo_finite_time")),
            "--alpha",
            "0.6",
            "--t-end",
            "0.2",
            "--mode",
            "full",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["alpha"] == 0.6
