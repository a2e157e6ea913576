import json
import subprocess
import sys
import time

import numpy as np
import pytest

from organsim import __version__
from organsim.actuation import ActuationSignal, save_params, signals_to_params
from organsim.cli import main
from organsim.dynamics import SimConfig
from organsim.mesh_io import export_frame, save_keyframes
from organsim.scene import load_scene
from organsim.synthetic import box_mesh, record_track


@pytest.fixture()
def box_obj(tmp_path):
    path = tmp_path / "box.obj"
    export_frame(box_mesh(1, size=0.1), path)
    return path


@pytest.fixture()
def scene_path(tmp_path, box_obj):
    path = tmp_path / "scene.json"
    code = main([
        "voxelize", str(box_obj), "--resolution", "2",
        "--stiffness", "100", "--damping", "1", "--mass", "0.1",
        "--out", str(path),
    ])
    assert code == 0
    return path


@pytest.fixture()
def driven_scene(tmp_path, scene_path):
    """Scene plus a params file that actuates its single region."""
    params = tmp_path / "params.json"
    scene = load_scene(scene_path)
    doc = signals_to_params({0: ActuationSignal.single(0.1, 2.0, 0.0)}, scene.regions)
    save_params(doc, params)
    return scene_path, params


@pytest.fixture()
def track_path(tmp_path, driven_scene):
    scene_file, params = driven_scene
    scene = load_scene(scene_file)
    sig = {0: ActuationSignal.single(0.1, 2.0, 0.0)}
    track = record_track(
        scene, SimConfig(dt=1 / 240), fps=20, period_s=0.5, periods=3,
        settle_periods=0, signals=sig,
    )
    path = tmp_path / "track.json"
    save_keyframes(track, path)
    return path


class TestVoxelize:
    def test_reports_counts(self, capsys, box_obj):
        assert main(["voxelize", str(box_obj), "--resolution", "2"]) == 0
        out = capsys.readouterr().out
        assert "8 particles, 28 constraints, 1 region" in out

    def test_singular_nouns(self, capsys, box_obj):
        assert main(["voxelize", str(box_obj), "--resolution", "1"]) == 0
        out = capsys.readouterr().out
        assert "1 particle, 0 constraints, 1 region" in out

    def test_writes_scene(self, scene_path):
        scene = load_scene(scene_path)
        assert scene.lattice.n_particles == 8
        assert scene.material.stiffness == 100.0

    def test_region_spec(self, capsys, tmp_path, box_obj):
        spec = tmp_path / "regions.json"
        spec.write_text(json.dumps([
            {"name": "bottom", "box": [[-1, -1, -1], [1, 1, 0.0]], "pinned": True},
            {"name": "rest"},
        ]), encoding="utf-8")
        assert main([
            "voxelize", str(box_obj), "--resolution", "2", "--regions", str(spec),
        ]) == 0
        assert "2 regions" in capsys.readouterr().out

    def test_missing_mesh_fails_cleanly(self, capsys, tmp_path):
        code = main(["voxelize", str(tmp_path / "nope.obj")])
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")


class TestSimulate:
    def test_writes_summary_frames_and_reports(self, capsys, tmp_path, driven_scene):
        scene_file, params = driven_scene
        summary_path = tmp_path / "summary.json"
        report_dir = tmp_path / "report"
        frames_prefix = tmp_path / "frames" / "surface"
        frames_prefix.parent.mkdir()
        code = main([
            "simulate", str(scene_file),
            "--duration", "0.1", "--fps", "24",
            "--params", str(params),
            "--out", str(summary_path),
            "--report-dir", str(report_dir),
            "--frames-out", str(frames_prefix),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "simulated 24 steps (0.100 s), captured 3 frames" in out

        summary = json.loads(summary_path.read_text(encoding="utf-8"))
        assert summary["steps"] == 24
        assert summary["frames"] == 3
        assert summary["duration"] == pytest.approx(0.1)
        assert summary["rms_displacement_final"] > 0.0

        assert (report_dir / "motion.csv").exists()
        assert (report_dir / "motion.png").exists()
        header = (report_dir / "motion.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header.split(",") == [
            "time", "rms_displacement", "max_displacement",
            "kinetic_energy", "spring_energy",
        ]
        for i in range(3):
            assert (tmp_path / "frames" / f"surface_{i:04d}.obj").exists()
        assert not (tmp_path / "frames" / "surface_0003.obj").exists()

    def test_quiet_scene_stays_at_rest(self, capsys, tmp_path, scene_path):
        summary_path = tmp_path / "summary.json"
        code = main([
            "simulate", str(scene_path), "--duration", "0.05", "--out", str(summary_path),
        ])
        assert code == 0
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
        assert summary["rms_displacement_final"] == 0.0
        assert summary["kinetic_energy_final"] == 0.0

    def test_unknown_param_region_rejected(self, capsys, tmp_path, scene_path):
        params = tmp_path / "params.json"
        scene = load_scene(scene_path)
        doc = signals_to_params({9: ActuationSignal.single(0.1, 1.0, 0.0)}, scene.regions)
        save_params(doc, params)
        code = main(["simulate", str(scene_path), "--params", str(params)])
        assert code == 2
        assert "unknown region ids [9]" in capsys.readouterr().err

    def test_perturb_seed_reproducible(self, tmp_path, scene_path):
        outs = []
        for name in ("a.json", "b.json"):
            path = tmp_path / name
            code = main([
                "simulate", str(scene_path), "--duration", "0.05",
                "--perturb", "0.01", "--seed", "7", "--out", str(path),
            ])
            assert code == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

        other = tmp_path / "c.json"
        main([
            "simulate", str(scene_path), "--duration", "0.05",
            "--perturb", "0.01", "--seed", "8", "--out", str(other),
        ])
        assert other.read_bytes() != outs[0]

    def test_corrupt_scene_rejected(self, capsys, tmp_path):
        bad = tmp_path / "scene.json"
        bad.write_text('{"format": "organsim-scene-1"}', encoding="utf-8")
        assert main(["simulate", str(bad)]) == 2
        assert capsys.readouterr().err.startswith("error:")


class TestFit:
    def test_fit_writes_params(self, capsys, tmp_path, scene_path, track_path):
        out = tmp_path / "fitted.json"
        report_dir = tmp_path / "fit-report"
        code = main([
            "fit", str(scene_path), "--keyframes", str(track_path),
            "--out", str(out), "--harmonics", "1",
            "--coupling-stiffness", "100", "--coupling-damping", "2",
            "--report-dir", str(report_dir),
        ])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "region 0" in stdout and "residual" in stdout
        assert f"parameters written to {out}" in stdout

        doc = json.loads(out.read_text(encoding="utf-8"))
        assert len(doc["regions"]) == 1
        region = doc["regions"][0]
        assert region["id"] == 0
        assert len(region["harmonics"]) == 1
        assert region["harmonics"][0]["f"] == pytest.approx(2.0, abs=0.4)
        assert (report_dir / "fit_params.csv").exists()
        assert (report_dir / "fit_signals.png").exists()

    def test_fit_needs_periodic_track(self, capsys, tmp_path, scene_path):
        scene = load_scene(scene_path)
        track = record_track(
            scene, SimConfig(dt=1 / 240), fps=20, period_s=0.5, periods=2,
            settle_periods=0,
        )
        track.period_frames = None
        path = tmp_path / "aperiodic.json"
        save_keyframes(track, path)
        out = tmp_path / "fitted.json"
        code = main([
            "fit", str(scene_path), "--keyframes", str(path), "--out", str(out),
        ])
        assert code == 2
        assert "period" in capsys.readouterr().err


class TestTune:
    def test_tune_progress_and_output(self, capsys, tmp_path, driven_scene, track_path):
        scene_file, params = driven_scene
        out = tmp_path / "tuned.json"
        report_dir = tmp_path / "tune-report"
        code = main([
            "tune", str(scene_file), "--keyframes", str(track_path),
            "--params", str(params), "--out", str(out),
            "--iterations", "2", "--population", "2", "--seed", "3",
            "--eval-periods", "1", "--report-dir", str(report_dir),
        ])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "iter    1/2  objective" in stdout
        assert "iter    2/2  objective" in stdout
        assert "->" in stdout and "accepted" in stdout

        doc = json.loads(out.read_text(encoding="utf-8"))
        assert doc["objective"] <= doc["initial_objective"]
        assert doc["regions"][0]["harmonics"]
        assert (report_dir / "tune_history.csv").exists()
        assert (report_dir / "tune_history.png").exists()
        rows = (report_dir / "tune_history.csv").read_text(encoding="utf-8").splitlines()
        assert rows[0].split(",") == ["iteration", "objective", "best", "temperature"]
        assert len(rows) == 3

    def test_tune_runs_are_reproducible(self, tmp_path, driven_scene, track_path):
        scene_file, params = driven_scene
        outs = []
        for name in ("t1.json", "t2.json"):
            path = tmp_path / name
            code = main([
                "tune", str(scene_file), "--keyframes", str(track_path),
                "--params", str(params), "--out", str(path),
                "--iterations", "2", "--population", "2", "--seed", "5",
                "--eval-periods", "1",
            ])
            assert code == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_scene_without_signals_needs_params(self, capsys, tmp_path, scene_path, track_path):
        out = tmp_path / "tuned.json"
        code = main([
            "tune", str(scene_path), "--keyframes", str(track_path),
            "--out", str(out), "--iterations", "1", "--population", "1",
        ])
        assert code == 2
        assert "nothing to tune" in capsys.readouterr().err


class TestConsoleEntry:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_installed_script(self, box_obj):
        proc = subprocess.run(
            ["organsim", "voxelize", str(box_obj), "--resolution", "2"],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0
        assert "8 particles" in proc.stdout

    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "organsim", "--version"],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0
        assert __version__ in proc.stdout


class TestServe:
    def test_announces_bound_port(self, driven_scene):
        scene_file, params = driven_scene
        proc = subprocess.Popen(
            [
                sys.executable, "-m", "organsim", "serve", str(scene_file),
                "--params", str(params), "--port", "0", "--broadcast-fps", "10",
            ],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
        )
        try:
            deadline = time.monotonic() + 60
            line = ""
            while time.monotonic() < deadline:
                line = proc.stdout.readline()
                if line:
                    break
            assert line.startswith("listening on ws://127.0.0.1:")
            port = int(line.rsplit(":", 1)[1])
            assert port > 0
        finally:
            proc.terminate()
            proc.wait(timeout=30)

    def test_tune_requires_keyframes(self, capsys, scene_path):
        code = main(["serve", str(scene_path), "--tune", "5"])
        assert code == 2
        assert "--tune needs --keyframes" in capsys.readouterr().err
