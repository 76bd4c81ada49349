import json

import pytest

from wfrsmc.cli import main


def write_config(path, **overrides):
    cfg = {"particles": 500, "schedule": {"family": "vp", "n_steps": 40}, "seed": 3}
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return str(path)


def run(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def config(tmp_path):
    return write_config(tmp_path / "cfg.json")


def test_usage_error_exit_2(capsys):
    code, _, err = run(["sample", "--bogus"], capsys)
    assert code == 2
    assert json.loads(err)["error"]["kind"] == "usage"


def test_missing_subcommand(capsys):
    code, _, _ = run([], capsys)
    assert code == 2


def test_unknown_config_key_names_field(tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.json", warp_factor=9)
    code, _, err = run(["sample", "--config", cfg, "--output-dir", str(tmp_path / "o")], capsys)
    assert code == 1
    payload = json.loads(err)["error"]
    assert payload["kind"] == "config" and payload["field"].endswith("warp_factor")


def test_invalid_value_exit_1(tmp_path, config, capsys):
    code, _, err = run(["sample", "--config", config, "--particles", "0",
                        "--output-dir", str(tmp_path / "o")], capsys)
    assert code == 1
    assert json.loads(err)["error"]["field"] == "particles"


def test_bad_threads(tmp_path, config, capsys):
    code, _, _ = run(["sample", "--config", config, "--threads", "0", "--output-dir", str(tmp_path / "o")], capsys)
    assert code == 1


def test_io_failure_exit_3(tmp_path, config, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run(["sample", "--config", config, "--output-dir", str(blocker)], capsys)
    assert code == 3
    assert json.loads(err)["error"]["kind"] == "io"


def test_sample_deterministic_and_thread_invariant(tmp_path, config, capsys):
    outs = []
    for name, threads in (("a", "1"), ("b", "1"), ("c", "3")):
        code, _, _ = run(["sample", "--config", config, "--threads", threads,
                          "--output-dir", str(tmp_path / name)], capsys)
        assert code == 0
        outs.append(tmp_path / name)
    for fname in ("ensemble.csv", "summary.json"):
        ref = (outs[0] / fname).read_bytes()
        assert (outs[1] / fname).read_bytes() == ref
        assert (outs[2] / fname).read_bytes() == ref


def test_sample_outputs(tmp_path, config, capsys):
    out = tmp_path / "o"
    code, stdout, _ = run(["sample", "--config", config, "--output-dir", str(out)], capsys)
    assert code == 0
    lines = (out / "ensemble.csv").read_text().splitlines()
    assert lines[0] == "snapshot_t,particle_id,x0,log_w,ell"
    assert len(lines) == 1 + 500
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 3
    assert set(summary) >= {"version", "config", "results"}
    assert "wall_time_s" not in summary
    assert "output_dir" not in summary["config"]
    assert summary["results"]["ess_trace"][0] == [1.0, 500.0]
    assert json.loads(stdout) == summary["results"]


def test_wall_time_flag(tmp_path, config, capsys):
    out = tmp_path / "o"
    assert run(["sample", "--config", config, "--wall-time", "--output-dir", str(out)], capsys)[0] == 0
    assert json.loads((out / "summary.json").read_text())["wall_time_s"] >= 0


def test_snapshots_written(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", snapshots=[1.0, 0.5])
    out = tmp_path / "o"
    assert run(["sample", "--config", cfg, "--output-dir", str(out)], capsys)[0] == 0
    times = {line.split(",")[0] for line in (out / "ensemble.csv").read_text().splitlines()[1:]}
    assert times == {"1.0", "0.5", "0.0"}


def test_diagnose_adjoint(tmp_path, config, capsys):
    out = tmp_path / "o"
    code, stdout, _ = run(["diagnose", "--check", "adjoint", "--states", "10", "--trials", "50",
                           "--config", config, "--output-dir", str(out)], capsys)
    assert code == 0
    result = json.loads(stdout)
    assert result["trials"] == 50 and result["max_residual"] < 1e-10
    assert (out / "diagnose_adjoint.json").exists()


def test_diagnose_gamma(tmp_path, config, capsys):
    code, stdout, _ = run(["diagnose", "--check", "gamma", "--config", config,
                           "--output-dir", str(tmp_path / "o")], capsys)
    assert code == 0
    result = json.loads(stdout)
    assert result["max_abs_gamma_linear_minus_1"] < 1e-8
    assert result["min_gamma2_minus_gamma_quadratic"] >= -1e-8


def test_diagnose_bad_states(tmp_path, config, capsys):
    code, _, _ = run(["diagnose", "--check", "adjoint", "--states", "1", "--config", config,
                      "--output-dir", str(tmp_path / "o")], capsys)
    assert code == 1


def test_geodesic_fisher_rao_t0(tmp_path, config, capsys):
    out = tmp_path / "o"
    code, _, _ = run(["geodesic", "--kind", "fisher_rao", "--t", "0", "0.5", "1",
                      "--rho0", "0", "1", "--rho1", "2", "1", "--config", config,
                      "--output-dir", str(out)], capsys)
    assert code == 0
    lines = (out / "geodesic_fisher_rao.csv").read_text().splitlines()
    assert lines[0] == "t,mu,sigma"
    assert [float(v) for v in lines[1].split(",")] == [0.0, 0.0, 1.0]
    end = [float(v) for v in lines[3].split(",")]
    assert end[1] == pytest.approx(2.0, abs=1e-8) and end[2] == pytest.approx(1.0, abs=1e-8)


def test_geodesic_grid_output(tmp_path, config, capsys):
    out = tmp_path / "o"
    code, _, _ = run(["geodesic", "--kind", "mixture", "--t", "0.5", "--config", config,
                      "--output-dir", str(out)], capsys)
    assert code == 0
    lines = (out / "geodesic_mixture.csv").read_text().splitlines()
    assert lines[0] == "t,cell_center,density" and len(lines) == 1 + 256


def test_geodesic_rejects_t(tmp_path, config, capsys):
    code, _, err = run(["geodesic", "--t", "1.5", "--config", config, "--output-dir", str(tmp_path / "o")], capsys)
    assert code == 1
    assert "--t" in json.loads(err)["error"]["message"]


def test_geodesic_rejects_sigma(tmp_path, config, capsys):
    code, _, _ = run(["geodesic", "--rho0", "0", "-1", "--config", config, "--output-dir", str(tmp_path / "o")],
                     capsys)
    assert code == 1


def test_geodesic_triangle(tmp_path, config, capsys):
    out = tmp_path / "o"
    code, stdout, _ = run(["geodesic", "--triangle", "--samples", "5", "--config", config,
                           "--output-dir", str(out)], capsys)
    assert code == 0
    files = json.loads(stdout)["files"]
    assert len(files) == 16
    for name in files:
        assert (out / name).read_text().startswith("curve,s,t,mu,sigma\n")


def test_oracle_command(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", schedule={"family": "vp", "n_steps": 20},
                       grid={"lo": -7, "hi": 9, "n_cells": 128}, snapshots=[0.5])
    out = tmp_path / "o"
    code, stdout, _ = run(["oracle", "--config", cfg, "--output-dir", str(out)], capsys)
    assert code == 0
    result = json.loads(stdout)
    assert result["grid_steps"] % 20 == 0
    for row in result["snapshots"]:
        assert row["mass"] == pytest.approx(1.0, abs=1e-8)
    assert result["snapshots"][-1]["l1_to_analytic"] < 5e-2
    assert (out / "grid.csv").read_text().startswith("t,x_center,density\n")


def test_equivalence_command(tmp_path, config, capsys):
    out = tmp_path / "o"
    code, stdout, _ = run(["equivalence", "--config", config, "--output-dir", str(out)], capsys)
    assert code == 0
    result = json.loads(stdout)
    assert result["adjoint_check"]["max_residual"] < 1e-10
    assert result["wasserstein1"] >= 0.0
    assert (out / "equivalence.json").exists()
