"""End-to-end tests of the command-line interface."""

import json

import numpy as np
import pytest

from stationkeep import cli

SMALL_COLLECT = ("collect.duration = 30.0\n"
                 "sysid.stack_size = 10\n")


@pytest.fixture()
def small_config(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(SMALL_COLLECT)
    return path


@pytest.fixture(scope="module")
def collected_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("collect")
    rc = cli.main(["collect", "--out", str(out)])
    assert rc == 0
    return out


class TestCollectCommand:
    def test_outputs(self, collected_dir):
        assert (collected_dir / "stack.csv").exists()
        assert (collected_dir / "collect_trajectory.csv").exists()
        assert (collected_dir / "collect_plan.png").exists()

    def test_zero_excitation_fails(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("collect.excitation_scale = 0\ncollect.duration = 20\n")
        rc = cli.main(["collect", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == 1
        assert "rank condition" in capsys.readouterr().err


class TestRunCommand:
    def test_linear_test_run(self, tmp_path):
        cfg = tmp_path / "lt.cfg"
        cfg.write_text("mode = linear-test\nsim.duration = 5.0\n")
        out = tmp_path / "out"
        rc = cli.main(["run", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        assert (out / "trajectory.csv").exists()
        report = json.loads((out / "report.json").read_text())
        assert report["max_delta_k_max"] <= 1e-6
        for name in ("pose.png", "velocity.png", "control.png", "plan.png",
                     "params.png", "learning.png"):
            assert (out / name).exists()

    def test_run_requires_stack_outside_linear_test(self, tmp_path, capsys):
        rc = cli.main(["run", "--out", str(tmp_path / "o")])
        assert rc == 1
        assert "--stack" in capsys.readouterr().err

    def test_full_run_with_stack(self, collected_dir, tmp_path):
        cfg = tmp_path / "short.cfg"
        cfg.write_text("sim.duration = 10.0\n")
        out = tmp_path / "out"
        rc = cli.main(["run", "--config", str(cfg),
                       "--stack", str(collected_dir / "stack.csv"),
                       "--out", str(out)])
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert report["n_steps"] == 500
        assert np.isfinite(report["final_xy_norm"])

    def test_determinism_byte_identical(self, collected_dir, tmp_path):
        cfg = tmp_path / "short.cfg"
        cfg.write_text("sim.duration = 8.0\nnoise.pose_std = 0.002\n")
        blobs = []
        for name in ("o1", "o2"):
            out = tmp_path / name
            rc = cli.main(["run", "--config", str(cfg),
                           "--stack", str(collected_dir / "stack.csv"),
                           "--out", str(out)])
            assert rc == 0
            blobs.append((out / "trajectory.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_seed_override_changes_noisy_run(self, collected_dir, tmp_path):
        cfg = tmp_path / "short.cfg"
        cfg.write_text("sim.duration = 4.0\nnoise.pose_std = 0.002\n")
        blobs = []
        for seed in ("0", "1"):
            out = tmp_path / f"s{seed}"
            rc = cli.main(["run", "--config", str(cfg),
                           "--stack", str(collected_dir / "stack.csv"),
                           "--out", str(out), "--seed", seed])
            assert rc == 0
            blobs.append((out / "trajectory.csv").read_bytes())
        assert blobs[0] != blobs[1]


class TestOracleCommand:
    def test_json_payload(self, capsys):
        rc = cli.main(["oracle"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        P = np.array(payload["P"])
        assert P.shape == (6, 6)
        assert np.allclose(P, P.T)
        assert np.array(payload["K"]).shape == (3, 6)
        assert len(payload["weights"]) == 21
        assert payload["are_residual"] <= 1e-8

    def test_zero_theta_variant(self, capsys):
        rc = cli.main(["oracle", "--theta", "zero"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["are_residual"] <= 1e-8


class TestCheckCommand:
    def test_reports_diagnostics(self, collected_dir, capsys):
        rc = cli.main(["check", "--stack", str(collected_dir / "stack.csv")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "rank condition: satisfied" in out
        assert "contraction rate" in out

    def test_dbar_flag_gives_positive_bound(self, collected_dir, capsys):
        rc = cli.main(["check", "--stack", str(collected_dir / "stack.csv"),
                       "--dbar", "0.001"])
        assert rc == 0
        out = capsys.readouterr().out
        line = [l for l in out.splitlines() if "ultimate bound" in l][0]
        assert float(line.rsplit(" ", 1)[1]) > 0.0


class TestConfigErrors:
    def test_bad_config_reports_line(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("sim.dt = -1\n")
        rc = cli.main(["oracle", "--config", str(cfg)])
        assert rc == 2
        assert "configuration error" in capsys.readouterr().err
