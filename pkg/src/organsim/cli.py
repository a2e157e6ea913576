"""Command-line interface.

Subcommands: voxelize (mesh to scene), simulate (batch run with OBJ frame
export and reports), fit (extract signals from a keyframe track), tune
(anneal signals against the track), serve (live WebSocket steering).
"""

from __future__ import annotations

import argparse
import asyncio
import json
import math
import pathlib
import sys

import numpy as np

from . import __version__
from .actuation import (
    apply_signals,
    couple_to_keyframes,
    fit_regions,
    load_params,
    record_training_run,
    report_to_params,
    save_params,
    signals_to_params,
)
from .dynamics import SimConfig, step, kinetic_energy, spring_energy
from .errors import OrganSimError, ValidationError
from .lattice import Material, load_region_spec, skinned_mesh
from .mesh_io import export_frame, frame_path, load_keyframes, load_mesh
from .scene import build_scene, load_scene, save_scene
from .service import ServiceConfig, serve_scene
from .tuner import AnnealConfig, anneal


def _count(n: int, noun: str) -> str:
    return f"{n} {noun}" if n == 1 else f"{n} {noun}s"


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dt", type=float, default=1.0 / 240.0, help="frame timestep in seconds")
    p.add_argument("--substeps", type=int, default=1, help="integrator substeps per frame")
    p.add_argument("--global-damping", type=float, default=0.0, help="velocity decay rate (1/s)")
    p.add_argument(
        "--gravity", type=float, nargs=3, default=(0.0, 0.0, 0.0),
        metavar=("GX", "GY", "GZ"), help="constant acceleration (m/s^2)",
    )


def _sim_config(args) -> SimConfig:
    return SimConfig(
        dt=args.dt,
        substeps=args.substeps,
        global_damping=args.global_damping,
        gravity=np.asarray(args.gravity, dtype=np.float64),
    ).validate()


def _load_signals(scene, path):
    signals = load_params(path)
    known = {r.id for r in scene.regions}
    unknown = sorted(set(signals) - known)
    if unknown:
        raise ValidationError(f"parameters reference unknown region ids {unknown}")
    return signals


def _load_track(scene, path):
    return load_keyframes(path, scene.mesh)


def cmd_voxelize(args) -> int:
    mesh = load_mesh(args.mesh)
    rules = load_region_spec(args.regions) if args.regions else None
    material = Material(stiffness=args.stiffness, damping=args.damping, mass=args.mass)
    scene = build_scene(mesh, args.resolution, rules, material)
    s = scene.summary()
    print(
        f"{_count(s['particles'], 'particle')}, "
        f"{_count(s['constraints'], 'constraint')}, "
        f"{_count(s['regions'], 'region')}"
    )
    if args.out:
        save_scene(scene, args.out)
        print(f"scene written to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    scene = load_scene(args.scene)
    cfg = _sim_config(args)
    signals = _load_signals(scene, args.params) if args.params else None
    if args.frames_out and scene.binding is None:
        raise ValidationError("scene has no skin binding; cannot export surface frames")
    if args.frames_out:
        parent = pathlib.Path(args.frames_out).parent
        if parent != pathlib.Path(""):
            parent.mkdir(parents=True, exist_ok=True)

    rests = scene.rest_table(signals)
    state = scene.new_state(cfg)
    if args.perturb:
        rng = np.random.default_rng(args.seed)
        movable = state.lattice.inverse_mass > 0.0
        noise = args.perturb * rng.standard_normal(state.lattice.velocities.shape)
        state.lattice.velocities[movable] += noise[movable]

    rest_positions = scene.lattice.positions.copy()
    total_steps = max(1, int(math.ceil(args.duration / cfg.dt - 1e-9)))
    frame_dt = 1.0 / args.fps
    rows = []
    frames_written = 0

    def capture(t: float) -> None:
        nonlocal frames_written
        disp = np.linalg.norm(state.lattice.positions - rest_positions, axis=1)
        rows.append(
            {
                "time": t,
                "rms_displacement": float(np.sqrt(np.mean(disp**2))),
                "max_displacement": float(np.max(disp)),
                "kinetic_energy": kinetic_energy(state.lattice),
                "spring_energy": spring_energy(state.lattice, rests(t)),
            }
        )
        if args.frames_out:
            surface = skinned_mesh(scene.binding, state.lattice, scene.mesh)
            export_frame(surface, frame_path(args.frames_out, frames_written))
        frames_written += 1

    capture(0.0)
    next_frame = 1
    for _ in range(total_steps):
        step(state, cfg, rests=rests)
        while next_frame * frame_dt <= state.time + 1e-12 and next_frame * frame_dt <= args.duration + 1e-12:
            capture(next_frame * frame_dt)
            next_frame += 1

    if args.report_dir:
        from .report import write_motion_report

        for path in write_motion_report(rows, args.report_dir):
            print(f"report written to {path}")
    if args.out:
        summary = {
            "duration": state.time,
            "steps": state.step_count,
            "frames": frames_written,
            "rms_displacement_final": rows[-1]["rms_displacement"],
            "max_displacement_final": rows[-1]["max_displacement"],
            "kinetic_energy_final": rows[-1]["kinetic_energy"],
            "spring_energy_final": rows[-1]["spring_energy"],
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, sort_keys=True, indent=1)
            fh.write("\n")
    print(
        f"simulated {_count(state.step_count, 'step')} ({state.time:.3f} s), "
        f"captured {_count(frames_written, 'frame')}"
    )
    return 0


def cmd_fit(args) -> int:
    scene = load_scene(args.scene)
    cfg = _sim_config(args)
    track = _load_track(scene, args.keyframes)
    if track.period_seconds is None:
        raise ValidationError("fitting needs a track with period_frames set")
    duration = args.duration if args.duration is not None else 3.0 * track.period_seconds

    coupling = couple_to_keyframes(scene, track, k_c=args.coupling_stiffness, k_cd=args.coupling_damping)
    state = scene.new_state(cfg)
    record_training_run(state, coupling, cfg, duration)
    report = fit_regions(coupling, scene.lattice, scene.regions, args.harmonics)
    doc = report_to_params(report)
    save_params(doc, args.out)
    for fit in report.fits:
        if fit.residual is None:
            print(f"region {fit.region_id} ({fit.name}): nothing to fit")
        else:
            print(
                f"region {fit.region_id} ({fit.name}): "
                f"{_count(len(fit.signal.harmonics), 'harmonic')}, "
                f"residual {fit.residual:.6f}"
            )
    print(f"parameters written to {args.out}")
    if args.report_dir:
        from .report import write_fit_report

        for path in write_fit_report(doc, args.report_dir):
            print(f"report written to {path}")
    return 0


def cmd_tune(args) -> int:
    scene = load_scene(args.scene)
    cfg = _sim_config(args)
    track = _load_track(scene, args.keyframes)
    signals = _load_signals(scene, args.params) if args.params else None
    anneal_cfg = AnnealConfig(
        iterations=args.iterations,
        population=args.population,
        seed=args.seed,
        t0=args.t0,
        cooling=args.cooling,
        eval_periods=args.eval_periods,
    )

    def progress(it, current, best, temperature):
        print(
            f"iter {it + 1:>4}/{anneal_cfg.iterations}  "
            f"objective {current:.6f}  best {best:.6f}  T {temperature:.5f}",
            flush=True,
        )

    result = anneal(scene, track, cfg, anneal_cfg, signals=signals, on_iteration=progress)
    doc = signals_to_params(result.best_signals, scene.regions)
    doc["objective"] = result.best_objective
    doc["initial_objective"] = result.initial_objective
    save_params(doc, args.out)
    print(
        f"objective {result.initial_objective:.6f} -> {result.best_objective:.6f} "
        f"({result.accepted} accepted, {result.evaluations} evaluations)"
    )
    print(f"parameters written to {args.out}")
    if args.report_dir:
        from .report import write_tune_report

        for path in write_tune_report(result.history, args.report_dir):
            print(f"report written to {path}")
    return 0


def cmd_serve(args) -> int:
    scene = load_scene(args.scene)
    cfg = _sim_config(args)
    if args.params:
        apply_signals(scene.regions, _load_signals(scene, args.params))
    svc = ServiceConfig(
        host=args.host,
        port=args.port,
        broadcast_fps=args.broadcast_fps,
        speed=args.speed,
        queue_limit=args.queue_limit,
    )
    track = None
    anneal_cfg = None
    if args.tune:
        if not args.keyframes:
            raise ValidationError("--tune needs --keyframes")
        track = _load_track(scene, args.keyframes)
        anneal_cfg = AnnealConfig(iterations=args.tune, population=args.population, seed=args.seed)
    try:
        asyncio.run(serve_scene(scene, cfg, svc, tune_track=track, anneal_cfg=anneal_cfg))
    except KeyboardInterrupt:
        print("stopped")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="organsim",
        description="Soft-body organ motion: voxel lattices, periodic actuation, "
        "keyframe fitting, annealing, and live steering.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("voxelize", help="build a scene from a surface mesh")
    p.add_argument("mesh", help="OBJ surface mesh")
    p.add_argument("--resolution", type=int, default=8, help="cells along the longest bbox axis")
    p.add_argument("--regions", help="region specification JSON")
    p.add_argument("--stiffness", type=float, default=500.0, help="spring stiffness (N/m)")
    p.add_argument("--damping", type=float, default=2.0, help="spring damping (N*s/m)")
    p.add_argument("--mass", type=float, default=0.2, help="particle mass (kg)")
    p.add_argument("--out", help="scene JSON output path")
    p.set_defaults(fn=cmd_voxelize)

    p = sub.add_parser("simulate", help="run a scene and export frames and reports")
    p.add_argument("scene", help="scene JSON from voxelize")
    p.add_argument("--duration", type=float, default=2.0, help="simulated seconds")
    p.add_argument("--params", help="fitted parameters JSON to drive the run")
    p.add_argument("--fps", type=float, default=24.0, help="capture rate for frames and reports")
    p.add_argument("--frames-out", help="prefix for exported OBJ frames")
    p.add_argument("--report-dir", help="directory for CSV and PNG reports")
    p.add_argument("--out", help="summary JSON output path")
    p.add_argument("--perturb", type=float, default=0.0, help="random initial speed (m/s)")
    p.add_argument("--seed", type=int, default=0, help="seed for --perturb")
    _add_sim_flags(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("fit", help="extract actuation signals from a keyframe track")
    p.add_argument("scene", help="scene JSON from voxelize")
    p.add_argument("--keyframes", required=True, help="keyframe track JSON")
    p.add_argument("--out", required=True, help="fitted parameters JSON output path")
    p.add_argument("--harmonics", type=int, default=2, help="harmonics per region (max 4)")
    p.add_argument("--coupling-stiffness", type=float, default=200.0, help="anchor stiffness (N/m)")
    p.add_argument("--coupling-damping", type=float, default=5.0, help="anchor damping (N*s/m)")
    p.add_argument("--duration", type=float, default=None, help="training seconds (default 3 periods)")
    p.add_argument("--report-dir", help="directory for CSV and PNG reports")
    _add_sim_flags(p)
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("tune", help="anneal signals against a keyframe track")
    p.add_argument("scene", help="scene JSON from voxelize")
    p.add_argument("--keyframes", required=True, help="keyframe track JSON")
    p.add_argument("--out", required=True, help="tuned parameters JSON output path")
    p.add_argument("--params", help="starting parameters (default: signals stored in the scene)")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--population", type=int, default=8, help="candidates per iteration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t0", type=float, default=None, help="initial temperature (default: 0.2x the starting objective)")
    p.add_argument("--cooling", type=float, default=0.97, help="temperature decay per iteration")
    p.add_argument("--eval-periods", type=int, default=2, help="scored periods per evaluation")
    p.add_argument("--report-dir", help="directory for CSV and PNG reports")
    _add_sim_flags(p)
    p.set_defaults(fn=cmd_tune)

    p = sub.add_parser("serve", help="live WebSocket steering service")
    p.add_argument("scene", help="scene JSON from voxelize")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765, help="0 picks a free port")
    p.add_argument("--params", help="fitted parameters JSON to drive the run")
    p.add_argument("--broadcast-fps", type=float, default=30.0, help="frame messages per second")
    p.add_argument("--speed", type=float, default=1.0, help="simulated seconds per wall second")
    p.add_argument("--queue-limit", type=int, default=8, help="frames buffered per client")
    p.add_argument("--tune", type=int, default=0, metavar="N", help="anneal N iterations in the background")
    p.add_argument("--keyframes", help="keyframe track JSON for --tune")
    p.add_argument("--population", type=int, default=8, help="candidates per tuning iteration")
    p.add_argument("--seed", type=int, default=0)
    _add_sim_flags(p)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except OrganSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
