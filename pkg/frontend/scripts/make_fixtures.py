"""Generate golden fixtures for the frontend test suite.

Two artifacts, written to frontend/tests/fixtures/:

  skinning_golden.json   mesh + binding + particle frames with the engine's
                         skinned vertex positions, so the TypeScript skinning
                         path can be checked coordinate-for-coordinate.
  steering_scene.json    small pinned-base scene served by `organsim serve`
                         in the end-to-end steering test.
  steering_expected.json reference displacement amplitude for that scene,
                         measured by running the same actuation offline.

Run from anywhere: paths are resolved relative to this file.
"""

import argparse
import json
import pathlib

import numpy as np

from organsim.actuation import ActuationSignal, apply_signals
from organsim.dynamics import SimConfig, step
from organsim.lattice import RegionRule, skin_update
from organsim.scene import build_scene, save_scene, scene_to_doc
from organsim.synthetic import box_mesh

DT = 1.0 / 240.0
FREQUENCY = 1.5  # Hz
AMPLITUDE = 0.1
SETTLE_S = 4.0  # six periods at 1.5 Hz
MEASURE_S = 4.0 / 3.0  # two periods


def demo_scene():
    """Box organ on a pinned base; region 0 is the steerable body."""
    mesh = box_mesh(5, size=0.1)
    rules = [
        RegionRule(name="body", box=np.array([[-1.0, -1.0, -0.02], [1.0, 1.0, 1.0]])),
        RegionRule(name="base", pinned=True),
    ]
    return build_scene(mesh, resolution=3, rules=rules)


def skinning_fixture(scene) -> dict:
    """Four particle frames with engine-skinned vertex positions."""
    binding = scene.binding
    lattice = scene.lattice
    rest = lattice.positions.copy()

    frames = []

    def capture(name):
        frames.append(
            {
                "name": name,
                "particles": lattice.positions.tolist(),
                "expected": skin_update(binding, lattice).tolist(),
            }
        )

    capture("rest")

    lattice.positions = rest + np.array([0.03, -0.01, 0.02])
    capture("translated")

    # Two mid-simulation states: actuated and velocity-perturbed so every
    # particle is off its rest position by a different amount.
    lattice.positions = rest.copy()
    apply_signals(scene.regions, {0: ActuationSignal.single(0.15, FREQUENCY, 0.0)})
    rng = np.random.default_rng(7)
    lattice.velocities += rng.standard_normal(lattice.velocities.shape) * 0.05
    lattice.velocities[lattice.inverse_mass == 0.0] = 0.0
    cfg = SimConfig(dt=DT).validate()
    state = scene.new_state(cfg)
    lattice = state.lattice  # new_state steps a private copy
    rests = scene.rest_table()
    for n, name in ((40, "wobble_a"), (40, "wobble_b")):
        for _ in range(n):
            step(state, cfg, rests=rests)
        capture(name)

    return {
        "mesh": {
            "name": scene.mesh.name,
            "vertices": scene.mesh.vertices.tolist(),
            "triangles": scene.mesh.triangles.tolist(),
        },
        "binding": {
            "indices": binding.indices.tolist(),
            "weights": binding.weights.tolist(),
            "offsets": binding.offsets.tolist(),
        },
        "frames": frames,
    }


def measure_amplitude(scene) -> float:
    """Max particle displacement from rest over the measurement window."""
    apply_signals(scene.regions, {0: ActuationSignal.single(AMPLITUDE, FREQUENCY, 0.0)})
    rest = scene.lattice.positions.copy()
    cfg = SimConfig(dt=DT).validate()
    state = scene.new_state(cfg)
    lattice = state.lattice
    rests = scene.rest_table()

    def run_window(seconds):
        peak = 0.0
        for _ in range(round(seconds / DT)):
            step(state, cfg, rests=rests)
            disp = np.linalg.norm(lattice.positions - rest, axis=1).max()
            peak = max(peak, disp)
        return peak

    run_window(SETTLE_S)
    amp = run_window(MEASURE_S)
    follow = run_window(MEASURE_S)
    drift = abs(follow - amp) / amp
    if drift > 0.02:
        raise RuntimeError(f"amplitude not settled: {amp:.6g} then {follow:.6g}")
    return amp


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default_out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"
    parser.add_argument("--out-dir", type=pathlib.Path, default=default_out)
    args = parser.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    scene = demo_scene()
    doc = skinning_fixture(demo_scene())
    path = args.out_dir / "skinning_golden.json"
    path.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {path} ({len(doc['frames'])} frames, {len(doc['mesh']['vertices'])} vertices)")

    scene_path = args.out_dir / "steering_scene.json"
    save_scene(scene, scene_path)
    print(f"wrote {scene_path} ({scene.lattice.n_particles} particles)")

    amp = measure_amplitude(demo_scene())
    expected = {
        "region": 0,
        "amplitude": AMPLITUDE,
        "frequency": FREQUENCY,
        "phase": 0.0,
        "settle_s": SETTLE_S,
        "measure_s": MEASURE_S,
        "expected_amplitude": amp,
    }
    path = args.out_dir / "steering_expected.json"
    path.write_text(json.dumps(expected, indent=1) + "\n")
    print(f"wrote {path} (expected amplitude {amp:.6g} m)")

    # The serve path must see the same region table the batch run used.
    regions = scene_to_doc(scene)["regions"]
    assert regions[0]["pinned"] is False and regions[1]["pinned"] is True


if __name__ == "__main__":
    main()
