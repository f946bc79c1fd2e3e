import json
from pathlib import Path

import numpy as np
import pytest

from ncslqg import save_model, uav_model
from ncslqg.cli import main


def write_uav(tmp_path, **overrides) -> Path:
    import dataclasses
    m = uav_model()
    if overrides:
        m = dataclasses.replace(m, **overrides)
    path = tmp_path / "model.json"
    save_model(m, path)
    return path


def test_solve_finite_writes_artifacts(tmp_path):
    model = write_uav(tmp_path)
    out = tmp_path / "out"
    rc = main(["solve-finite", "--config", str(model), "--out", str(out),
               "--horizon", "20"])
    assert rc == 0
    assert (out / "finite_solution.json").is_file()
    assert (out / "finite_gains.csv").is_file()
    summary = json.loads((out / "cost_summary.json").read_text())
    assert summary["horizon"] == 20 and summary["p"] == 0.5
    assert summary["optimal_cost"] > 0
    gains_lines = (out / "finite_gains.csv").read_text().strip().split("\n")
    assert gains_lines[0] == "k,K_0_0,K_1_0,corr_0_0"
    assert len(gains_lines) == 22


def test_solve_finite_horizon_zero(tmp_path):
    model = write_uav(tmp_path)
    out = tmp_path / "out"
    rc = main(["solve-finite", "--config", str(model), "--out", str(out),
               "--horizon", "0"])
    assert rc == 0
    doc = json.loads((out / "finite_solution.json").read_text())
    assert doc["N"] == 0
    assert len(doc["Z"]) == 2
    assert doc["Z"][0] == doc["X"][0]  # zero terminal weight: one step gives Q


def test_malformed_model_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    rc = main(["solve-finite", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 2
    rc2 = main(["solve-finite", "--config", str(tmp_path / "absent.json"),
                "--out", str(tmp_path / "o")])
    assert rc2 == 2


def test_infeasible_exits_3(tmp_path):
    model = write_uav(tmp_path, RL=0.0, RR=0.0)
    rc = main(["solve-finite", "--config", str(model), "--out", str(tmp_path / "o"),
               "--horizon", "5"])
    assert rc == 3


def test_unobservable_exits_4(tmp_path):
    model = write_uav(tmp_path, Q=0.0)
    rc = main(["solve-infinite", "--config", str(model), "--out", str(tmp_path / "o")])
    assert rc == 4


def test_solve_infinite_and_simulate_pipeline(tmp_path):
    model = write_uav(tmp_path)
    out = tmp_path / "out"
    rc = main(["solve-infinite", "--config", str(model), "--out", str(out)])
    assert rc == 0
    gains_doc = json.loads((out / "stationary_gains.json").read_text())
    assert gains_doc["kind"] == "stationary"
    report = json.loads((out / "stability_report.json").read_text())
    assert report["converges"] and report["rho"] < 1
    assert "regulator_spectral_radius" in report

    rc = main(["simulate", "--config", str(model), "--out", str(out),
               "--seed", "3", "--rollouts", "200", "--horizon", "30",
               "--noise", "off", "--trace", "2"])
    assert rc == 0
    agg = json.loads((out / "aggregates.json").read_text())
    assert agg["rollouts"] == 200
    assert (out / "trace_000.csv").is_file() and (out / "trace_001.csv").is_file()
    curve = (out / "mean_square_state.csv").read_text().strip().split("\n")
    assert curve[0] == "series,k,value"
    assert len(curve) == 33  # header + N+2 points


def test_simulate_without_gains_exits_5(tmp_path):
    model = write_uav(tmp_path)
    rc = main(["simulate", "--config", str(model), "--out", str(tmp_path / "empty"),
               "--rollouts", "10", "--horizon", "5"])
    assert rc == 5


def test_sweep_p(tmp_path):
    model = write_uav(tmp_path)
    out = tmp_path / "out"
    rc = main(["sweep-p", "--config", str(model), "--out", str(out),
               "--horizon", "20", "--p-grid", "0:1:0.25"])
    assert rc == 0
    lines = (out / "cost_vs_p.csv").read_text().strip().split("\n")
    assert lines[0] == "p,optimal_cost"
    ps = [float(l.split(",")[0]) for l in lines[1:]]
    assert ps == [0.0, 0.25, 0.5, 0.75, 1.0]
    costs = [float(l.split(",")[1]) for l in lines[1:]]
    assert costs == sorted(costs)


def test_sweep_p_empty_grid_exits_2(tmp_path):
    model = write_uav(tmp_path)
    rc = main(["sweep-p", "--config", str(model), "--out", str(tmp_path / "o"),
               "--p-grid", "0.5:0.1:0.1"])
    assert rc == 2


def test_p_override(tmp_path):
    model = write_uav(tmp_path)
    out = tmp_path / "out"
    rc = main(["solve-finite", "--config", str(model), "--out", str(out),
               "--horizon", "10", "--p", "0.9"])
    assert rc == 0
    summary = json.loads((out / "cost_summary.json").read_text())
    assert summary["p"] == 0.9


def test_uav_demo_artifacts_and_determinism(tmp_path):
    out1 = tmp_path / "d1"
    out2 = tmp_path / "d2"
    args = ["uav-demo", "--seed", "5", "--rollouts", "80", "--horizon", "40"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    names = sorted(p.name for p in out1.iterdir())
    expected = ["aggregates_noise_off.json", "aggregates_noise_on.json",
                "cost_summary.json", "cost_vs_p.csv", "fig_msq_noise_off.csv",
                "fig_msq_noise_on.csv", "fig_velocity.csv", "finite_gains.csv",
                "finite_solution.json", "model.json", "stability_report_noise_off.json",
                "stability_report_noise_on.json", "stationary_gains_noise_off.json",
                "stationary_gains_noise_on.json"]
    assert names == expected
    for name in names:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    velocity = (out1 / "fig_velocity.csv").read_text().strip().split("\n")
    series = {line.split(",")[0] for line in velocity[1:]}
    assert series == {"p0", "p0.5", "p1"}


def test_uav_demo_p_override_only_touches_msq_runs(tmp_path):
    out = tmp_path / "d"
    rc = main(["uav-demo", "--seed", "5", "--rollouts", "40", "--horizon", "30",
               "--p", "0.7", "--out", str(out)])
    assert rc == 0
    # cost summary still uses the bundled p
    summary = json.loads((out / "cost_summary.json").read_text())
    assert summary["p"] == 0.5
    # both mean-square runs use the override
    for tag in ("noise_off", "noise_on"):
        curve = (out / f"fig_msq_{tag}.csv").read_text()
        assert curve.startswith("series,k,value\np0.7-")
    # velocity trio unchanged
    velocity = (out / "fig_velocity.csv").read_text()
    assert "p0," in velocity and "p0.5," in velocity and "p1," in velocity
