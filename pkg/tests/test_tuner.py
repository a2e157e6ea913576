import math

import numpy as np
import pytest

from organsim.actuation import ActuationSignal, couple_to_keyframes
from organsim.dynamics import SimConfig
from organsim.errors import ValidationError
from organsim.lattice import Material, RegionRule
from organsim.mesh_io import KeyframeTrack
from organsim.scene import build_scene
from organsim.synthetic import box_mesh, record_track
from organsim.tuner import AnnealConfig, anneal, coupled_objective, drift, objective


def tiny_scene(amplitude=0.05):
    """8-particle cube whose mesh vertices sit exactly on the particles."""
    mesh = box_mesh(1, size=0.05, center=(0.05, 0.05, 0.05))
    rules = [RegionRule(name="all", actuation=ActuationSignal.single(amplitude, 2.0, 0.0))]
    return build_scene(mesh, 2, rules, Material(stiffness=100.0, damping=1.0, mass=0.1))


def pinned_scene():
    mesh = box_mesh(1, size=0.05, center=(0.05, 0.05, 0.05))
    rules = [RegionRule(name="all", pinned=True)]
    return build_scene(mesh, 2, rules, Material(stiffness=100.0, damping=1.0, mass=0.1))


def constant_track(mesh, shift, fps=20.0, frames=30, period_frames=10):
    stack = np.repeat(mesh.vertices[None] + np.asarray(shift), frames, axis=0)
    return KeyframeTrack(fps=fps, frames=stack, period_frames=period_frames)


CFG = SimConfig(dt=1 / 240)


@pytest.fixture(scope="module")
def problem():
    scene = tiny_scene(amplitude=0.08)
    track = record_track(scene, CFG, fps=20, period_s=0.5, periods=3, settle_periods=0)
    return scene, track


class TestObjective:
    def test_static_body_on_own_rest_pose_scores_zero(self):
        scene = pinned_scene()
        track = constant_track(scene.mesh, (0.0, 0.0, 0.0))
        assert objective(scene, track, CFG) == 0.0

    def test_uniform_offset_scores_distance_over_diagonal(self):
        # Every target sits exactly `shift` away from a particle that cannot
        # move, so the RMS error is |shift| regardless of the window.
        scene = pinned_scene()
        shift = (0.003, -0.004, 0.0)
        track = constant_track(scene.mesh, shift)
        expected = 0.005 / scene.mesh.bbox_diagonal()
        assert objective(scene, track, CFG) == pytest.approx(expected, rel=1e-12)

    def test_diverged_run_scores_inf(self):
        scene = tiny_scene()
        scene.lattice.velocities[:] = 1e7
        track = constant_track(scene.mesh, (0.0, 0.0, 0.0))
        assert objective(scene, track, CFG) == math.inf

    def test_track_without_period_rejected(self):
        scene = pinned_scene()
        track = constant_track(scene.mesh, (0.0, 0.0, 0.0))
        track.period_frames = None
        with pytest.raises(ValidationError, match="period"):
            objective(scene, track, CFG)

    def test_eval_periods_must_be_positive(self):
        scene = pinned_scene()
        track = constant_track(scene.mesh, (0.0, 0.0, 0.0))
        with pytest.raises(ValidationError, match="eval_periods"):
            objective(scene, track, CFG, eval_periods=0)

    def test_matching_signal_beats_dead_body(self):
        scene = tiny_scene(amplitude=0.08)
        track = record_track(scene, CFG, fps=20, period_s=0.5, periods=3, settle_periods=0)
        with_signal = objective(scene, track, CFG)
        dead = objective(scene, track, CFG, signals={0: ActuationSignal.zero()})
        assert with_signal < dead

    def test_drift_report(self):
        scene = tiny_scene()
        track = record_track(scene, CFG, fps=20, period_s=0.5, periods=3, settle_periods=0)
        coupling = couple_to_keyframes(scene, track, k_c=50.0, k_cd=1.0)
        report = drift(scene, track, CFG, coupling)
        assert set(report) == {"free", "coupled", "drift"}
        assert report["drift"] == pytest.approx(report["free"] - report["coupled"])
        assert report["coupled"] == pytest.approx(
            coupled_objective(scene, track, CFG, coupling)
        )


class TestAnnealConfig:
    def test_defaults_valid(self):
        AnnealConfig().validate()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"iterations": 0},
            {"population": 0},
            {"cooling": 0.0},
            {"cooling": 1.5},
            {"t0": -1.0},
        ],
    )
    def test_bad_config_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            AnnealConfig(**kwargs).validate()


class TestAnneal:
    def test_never_worse_than_start(self, problem):
        scene, track = problem
        start = {0: ActuationSignal.single(0.03, 1.7, 0.5)}
        result = anneal(scene, track, CFG, AnnealConfig(iterations=6, population=3), start)
        assert result.best_objective <= result.initial_objective
        assert result.evaluations == 1 + 6 * 3
        assert 0 <= result.accepted <= 6

    def test_same_seed_reproduces_run(self, problem):
        scene, track = problem
        cfg = AnnealConfig(iterations=5, population=2, seed=11)
        a = anneal(scene, track, CFG, cfg)
        b = anneal(scene, track, CFG, cfg)
        assert a.history == b.history
        assert a.best_objective == b.best_objective
        for rid in a.best_signals:
            for ha, hb in zip(a.best_signals[rid].harmonics, b.best_signals[rid].harmonics):
                assert (ha.amplitude, ha.frequency, ha.phase) == (
                    hb.amplitude,
                    hb.frequency,
                    hb.phase,
                )

    def test_best_signals_stay_valid(self, problem):
        scene, track = problem
        result = anneal(scene, track, CFG, AnnealConfig(iterations=8, population=3, seed=4))
        for sig in result.best_signals.values():
            sig.validate()

    def test_input_signals_not_mutated(self, problem):
        scene, track = problem
        start = {0: ActuationSignal.single(0.03, 1.7, 0.5)}
        anneal(scene, track, CFG, AnnealConfig(iterations=3, population=2), start)
        h = start[0].harmonics[0]
        assert (h.amplitude, h.frequency, h.phase) == (0.03, 1.7, 0.5)

    def test_history_and_progress_callback(self, problem):
        scene, track = problem
        seen = []
        cfg = AnnealConfig(iterations=4, population=2, seed=1, t0=0.01, cooling=0.9)
        result = anneal(
            scene, track, CFG, cfg, on_iteration=lambda *args: seen.append(args)
        )
        assert len(result.history) == 4
        assert [row["iteration"] for row in result.history] == [0, 1, 2, 3]
        temps = [row["temperature"] for row in result.history]
        assert temps[0] == pytest.approx(0.01)
        for prev, cur in zip(temps, temps[1:]):
            assert cur == pytest.approx(prev * 0.9)
        assert [s[0] for s in seen] == [0, 1, 2, 3]
        assert seen[-1][2] == result.history[-1]["best"]
        assert all(row["best"] <= row["objective"] or math.isinf(row["objective"])
                   for row in result.history)

    def test_nothing_to_tune_rejected(self, problem):
        scene, track = problem
        with pytest.raises(ValidationError, match="nothing to tune"):
            anneal(scene, track, CFG, AnnealConfig(iterations=1, population=1),
                   {0: ActuationSignal.zero()})

    def test_scene_signals_used_when_none_given(self, problem):
        scene, track = problem
        result = anneal(scene, track, CFG, AnnealConfig(iterations=2, population=2))
        assert set(result.best_signals) == {0}
