"""Command-line interface: subcommand workflows, exit codes, config
precedence and determinism."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from posecorrect import io as trajio
from posecorrect.cli import main
from posecorrect.liegeom import rotation_angle_deg

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    code = main([
        "simulate", "--shape", "forward", "--seed", "5", "--drift", "1.0",
        "--out", str(out),
    ])
    assert code == 0
    return out


def make_update_files(sim_dir, out_dir):
    est = trajio.read_tum(sim_dir / "est.tum")
    gt = trajio.read_tum(sim_dir / "gt.tum")
    rows = [
        int(line)
        for line in (sim_dir / "kf_index.txt").read_text().splitlines()
        if line and not line.startswith("#")
    ]
    old = out_dir / "kf_old.tum"
    new = out_dir / "kf_new.tum"
    trajio.write_tum(old, [est[i] for i in rows])
    trajio.write_tum(new, [gt[i] for i in rows])
    return old, new


class TestSimulate:
    def test_outputs_written(self, sim_dir):
        for name in ("scene.txt", "gt.tum", "est.tum", "kf_index.txt", "config.json"):
            assert (sim_dir / name).exists()

    def test_deterministic_for_equal_seed(self, sim_dir, tmp_path):
        out2 = tmp_path / "again"
        assert main([
            "simulate", "--shape", "forward", "--seed", "5", "--drift", "1.0",
            "--out", str(out2),
        ]) == 0
        for name in ("scene.txt", "gt.tum", "est.tum", "kf_index.txt"):
            assert (sim_dir / name).read_bytes() == (out2 / name).read_bytes()


class TestCorrect:
    def test_identity_update_reproduces_input(self, sim_dir, tmp_path):
        old, _ = make_update_files(sim_dir, tmp_path)
        out = tmp_path / "corr"
        code = main([
            "correct", "--traj", str(sim_dir / "est.tum"),
            "--kf-index", str(sim_dir / "kf_index.txt"),
            "--kf-old", str(old), "--kf-new", str(old),
            "--methods", "proposed", "--out", str(out),
        ])
        assert code == 0
        original = trajio.read_tum(sim_dir / "est.tum")
        corrected = trajio.read_tum(out / "corrected.tum")
        for (fa, pa), (fb, pb) in zip(original, corrected):
            assert abs(fa.stamp - fb.stamp) < 1e-9
            assert np.linalg.norm(pa.translation - pb.translation) < 1e-9
            assert rotation_angle_deg(pa.rotation, pb.rotation) < 1e-9

    def test_diagnostics_written(self, sim_dir, tmp_path):
        old, new = make_update_files(sim_dir, tmp_path)
        out = tmp_path / "corr2"
        assert main([
            "correct", "--traj", str(sim_dir / "est.tum"),
            "--kf-index", str(sim_dir / "kf_index.txt"),
            "--kf-old", str(old), "--kf-new", str(new),
            "--methods", "proposed", "--out", str(out),
        ]) == 0
        lines = (out / "diagnostics.csv").read_text().splitlines()
        assert lines[0].startswith("segment,terminal,s,")
        assert len(lines) == 1 + 8  # 7 full segments + terminal

    def test_missing_keyframe_file_exit_two(self, sim_dir, tmp_path, capsys):
        code = main([
            "correct", "--traj", str(sim_dir / "est.tum"),
            "--kf-index", str(sim_dir / "kf_index.txt"),
            "--kf-old", "/does/not/exist.tum", "--kf-new", str(sim_dir / "gt.tum"),
            "--out", str(tmp_path / "x"),
        ])
        assert code == 2
        assert "/does/not/exist.tum" in capsys.readouterr().err

    def test_multiple_methods_rejected(self, sim_dir, tmp_path, capsys):
        code = main([
            "correct", "--traj", str(sim_dir / "est.tum"),
            "--kf-index", str(sim_dir / "kf_index.txt"),
            "--kf-old", str(sim_dir / "gt.tum"), "--kf-new", str(sim_dir / "gt.tum"),
            "--methods", "proposed,xyz", "--out", str(tmp_path / "x"),
        ])
        assert code == 2


class TestEvaluate:
    def test_gt_as_estimate_zero_report(self, sim_dir, tmp_path):
        out = tmp_path / "ev0"
        assert main([
            "evaluate", "--traj", str(sim_dir / "gt.tum"),
            "--gt", str(sim_dir / "gt.tum"),
            "--kf-index", str(sim_dir / "kf_index.txt"),
            "--methods", "all", "--out", str(out),
        ]) == 0
        rows = (out / "report.csv").read_text().splitlines()[1:]
        assert len(rows) == 7
        for row in rows:
            fields = row.split(",")
            assert float(fields[2]) < 1e-9  # t_mean_cm
            assert float(fields[5]) < 1e-9  # r_mean_deg

    def test_unknown_method_exit_two(self, sim_dir, tmp_path, capsys):
        code = main([
            "evaluate", "--traj", str(sim_dir / "est.tum"),
            "--gt", str(sim_dir / "gt.tum"),
            "--kf-index", str(sim_dir / "kf_index.txt"),
            "--methods", "bspline", "--out", str(tmp_path / "x"),
        ])
        assert code == 2
        assert "bspline" in capsys.readouterr().err

    def test_malformed_input_exit_two_with_line(self, tmp_path, capsys):
        code = main([
            "evaluate", "--traj", str(DATA / "malformed.tum"),
            "--gt", str(DATA / "valid.tum"),
            "--kf-index", str(DATA / "valid.tum"),
            "--out", str(tmp_path / "x"),
        ])
        assert code == 2
        err = capsys.readouterr().err
        assert "malformed.tum:3" in err

    def test_threads_byte_identical(self, sim_dir, tmp_path):
        outs = []
        for threads in ("1", "4"):
            out = tmp_path / f"thr{threads}"
            assert main([
                "evaluate", "--traj", str(sim_dir / "est.tum"),
                "--gt", str(sim_dir / "gt.tum"),
                "--kf-index", str(sim_dir / "kf_index.txt"),
                "--methods", "all", "--threads", threads, "--out", str(out),
            ]) == 0
            outs.append(out)
        names = [p.name for p in outs[0].iterdir() if p.name != "config.json"]
        assert "report.csv" in names
        for name in names:
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


class TestBench:
    def test_timing_csv_written(self, tmp_path):
        out = tmp_path / "bench"
        assert main([
            "bench", "--methods", "proposed,so3", "--repetitions", "30",
            "--out", str(out),
        ]) == 0
        lines = (out / "timing.csv").read_text().splitlines()
        assert lines[0] == "method,mean_ms,std_ms,median_ms,count"
        assert len(lines) == 3
        med = float(lines[1].split(",")[3])
        assert 0.0 < med < 100.0


class TestConfigPrecedence:
    def test_config_file_supplies_defaults_flags_override(self, sim_dir, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"methods": "xyz", "assoc-tol": 0.02}))
        out = tmp_path / "ev_cfg"
        assert main([
            "evaluate", "--traj", str(sim_dir / "est.tum"),
            "--gt", str(sim_dir / "gt.tum"),
            "--kf-index", str(sim_dir / "kf_index.txt"),
            "--config", str(cfg_path),
            "--methods", "proposed",  # flag wins over config
            "--out", str(out),
        ]) == 0
        effective = json.loads((out / "config.json").read_text())
        assert effective["methods"] == "proposed"
        assert effective["assoc_tol"] == 0.02

    def test_effective_config_echoed(self, sim_dir, tmp_path):
        out = tmp_path / "ev_echo"
        assert main([
            "evaluate", "--traj", str(sim_dir / "est.tum"),
            "--gt", str(sim_dir / "gt.tum"),
            "--kf-index", str(sim_dir / "kf_index.txt"),
            "--out", str(out),
        ]) == 0
        effective = json.loads((out / "config.json").read_text())
        assert effective["threads"] == 1
        assert effective["trans_space"] == "xyz"

    def test_bad_config_json_exit_two(self, sim_dir, tmp_path, capsys):
        cfg_path = tmp_path / "broken.json"
        cfg_path.write_text("{not json")
        code = main([
            "evaluate", "--traj", str(sim_dir / "est.tum"),
            "--gt", str(sim_dir / "gt.tum"),
            "--kf-index", str(sim_dir / "kf_index.txt"),
            "--config", str(cfg_path),
            "--out", str(tmp_path / "x"),
        ])
        assert code == 2


class TestLogging:
    def test_env_var_sets_level(self, tmp_path, monkeypatch, caplog):
        import logging

        monkeypatch.setenv("POSECORRECT_LOG", "INFO")
        with caplog.at_level(logging.INFO):
            assert main([
                "simulate", "--shape", "line", "--n-keyframes", "3",
                "--out", str(tmp_path / "logged"),
            ]) == 0
        assert any("wrote scene" in rec.message for rec in caplog.records)


class TestConsoleEntry:
    def test_module_invocation(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "posecorrect.cli", "simulate", "--shape", "line",
             "--n-keyframes", "3", "--out", str(tmp_path / "cli_sim")],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0
        assert (tmp_path / "cli_sim" / "scene.txt").exists()

    def test_kitti_input_accepted(self, tmp_path):
        out = tmp_path / "ev_kitti"
        kf_path = tmp_path / "kf.txt"
        kf_path.write_text("0\n2\n")
        code = main([
            "evaluate", "--traj", str(DATA / "valid.kitti"),
            "--gt", str(DATA / "valid.kitti"),
            "--kf-index", str(kf_path),
            "--methods", "no-correction", "--out", str(out),
        ])
        assert code == 0
