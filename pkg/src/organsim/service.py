"""WebSocket steering service: one simulation loop, many viewers.

A single asyncio task owns the simulation state and advances it on a
wall-clock schedule (optionally scaled). Client commands land in a queue
and are applied between steps, so the physics never sees a half-applied
change. Each client gets a bounded outgoing queue; when a slow client falls
behind, its oldest frames are dropped rather than stalling the loop.

Parameter changes keep the modulation continuous: incoming harmonics have
their phases re-anchored so the rest-length signal never jumps, which would
otherwise kick the lattice. The phase supplied by the client is therefore
advisory; amplitude and frequency are authoritative.
"""

from __future__ import annotations

import asyncio
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from websockets.asyncio.server import serve as ws_serve
from websockets.exceptions import ConnectionClosed

from .actuation import TWO_PI, ActuationSignal
from .dynamics import SimConfig, step, total_energy
from .errors import InstabilityDetected, ValidationError
from .mesh_io import KeyframeTrack
from .protocol import (
    ProtocolError,
    decode_client,
    encode,
    error_message,
    frame_message,
    hello_message,
    snapshot_message,
    tune_progress_message,
)
from .scene import Scene, scene_to_doc
from .tuner import AnnealConfig, anneal


@dataclass
class Poke:
    point: np.ndarray
    force: np.ndarray
    radius: float
    t_end: float


def reanchor_phases(old: ActuationSignal, new: ActuationSignal, t: float) -> ActuationSignal:
    """Choose phases for `new` so its value matches `old` at time t.

    Harmonics are matched by index. The matching branch of asin keeps the
    slope sign; harmonics with no predecessor (or a zero-amplitude one)
    start at a rising zero crossing. Modifies and returns `new`.
    """
    for k, h in enumerate(new.harmonics):
        w = TWO_PI * h.frequency
        theta = 0.0
        if k < len(old.harmonics) and abs(h.amplitude) > 1e-12:
            prev = old.harmonics[k]
            theta_old = TWO_PI * prev.frequency * t + prev.phase
            value = prev.amplitude * math.sin(theta_old)
            slope = prev.amplitude * math.cos(theta_old)
            ratio = max(-1.0, min(1.0, value / h.amplitude))
            theta = math.asin(ratio)
            if slope < 0:
                theta = math.pi - theta
        h.phase = (theta - w * t) % TWO_PI
    return new


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    broadcast_fps: float = 30.0
    speed: float = 1.0  # simulated seconds per wall second
    queue_limit: int = 8  # outgoing frames buffered per client
    clamp_epsilon: float = 0.1

    def validate(self) -> "ServiceConfig":
        if self.broadcast_fps <= 0 or self.speed <= 0 or self.queue_limit < 1:
            raise ValidationError("broadcast_fps, speed, and queue_limit must be positive")
        return self


class SteeringService:
    def __init__(self, scene: Scene, cfg: SimConfig, svc: ServiceConfig | None = None):
        self.scene = scene
        self.cfg = cfg.validate()
        self.svc = (svc or ServiceConfig()).validate()
        self.regions = [r for r in scene.regions]
        self.signals = {r.id: r.actuation.copy() for r in scene.regions}
        self.state = scene.new_state(cfg)
        self.rests = scene.rest_table(self.signals, self.svc.clamp_epsilon)
        self.paused = False
        self.pokes: list[Poke] = []
        self.commands: asyncio.Queue = asyncio.Queue()
        self.clients: dict = {}
        self.stride = max(1, round(1.0 / (cfg.dt * self.svc.broadcast_fps)))
        self._tune_thread: threading.Thread | None = None

    # ---- simulation loop -------------------------------------------------

    def _poke_forces(self):
        t_now = self.state.time
        self.pokes = [p for p in self.pokes if p.t_end > t_now]
        if not self.pokes:
            return None
        pokes = list(self.pokes)

        def forces(t, x, v):
            out = np.zeros_like(x)
            for p in pokes:
                d = np.linalg.norm(x - p.point, axis=1)
                w = np.clip(1.0 - d / p.radius, 0.0, None)
                out += w[:, None] * p.force
            return out

        return forces

    async def run_loop(self):
        loop = asyncio.get_running_loop()
        next_tick = loop.time()
        while True:
            while not self.commands.empty():
                ws, msg = self.commands.get_nowait()
                self._apply(ws, msg)
            if not self.paused:
                try:
                    step(self.state, self.cfg, rests=self.rests, extra_forces=self._poke_forces())
                except InstabilityDetected as exc:
                    self._broadcast(encode(error_message(f"simulation diverged: {exc}; pausing")))
                    self.paused = True
                    continue
                if self.state.step_count % self.stride == 0:
                    self._broadcast(self._frame_text())
            next_tick += self.cfg.dt / self.svc.speed
            delay = next_tick - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                # behind schedule: keep physics stepping, drop the debt if
                # it grows past a quarter second so we never spiral
                if delay < -0.25:
                    next_tick = loop.time()
                await asyncio.sleep(0)

    def _frame_text(self) -> str:
        lat = self.state.lattice
        energy = total_energy(lat, self.rests(self.state.time))
        return encode(frame_message(self.state.step_count, self.state.time, lat.positions, energy))

    def _broadcast(self, text: str) -> None:
        for queue in self.clients.values():
            _offer(queue, text)

    # ---- command application --------------------------------------------

    def _apply(self, ws, msg: dict) -> None:
        kind = msg["type"]
        try:
            if kind == "set_params":
                self._apply_set_params(msg)
            elif kind == "poke":
                self.pokes.append(
                    Poke(
                        point=np.asarray(msg["point"], dtype=np.float64),
                        force=np.asarray(msg["force"], dtype=np.float64),
                        radius=float(msg["radius"]),
                        t_end=self.state.time + float(msg["duration"]),
                    )
                )
            elif kind == "pause":
                self.paused = True
            elif kind == "resume":
                self.paused = False
            elif kind == "reset":
                fresh = self.scene.new_state(self.cfg)
                # Keep the clock: frame step indices stay monotone for
                # connected clients and actuation phase is not rewound.
                fresh.time = self.state.time
                fresh.step_count = self.state.step_count
                self.state = fresh
                self.pokes.clear()
            elif kind == "snapshot":
                snap = Scene(
                    mesh=self.scene.mesh,
                    grid=self.scene.grid,
                    regions=self.regions,
                    material=self.scene.material,
                    lattice=self.state.lattice,
                    binding=self.scene.binding,
                )
                if ws in self.clients:
                    _offer(self.clients[ws], encode(snapshot_message(scene_to_doc(snap))))
        except (ValidationError, KeyError) as exc:
            if ws in self.clients:
                _offer(self.clients[ws], encode(error_message(str(exc))))

    def _apply_set_params(self, msg: dict) -> None:
        rid = msg["region"]
        region = next((r for r in self.regions if r.id == rid), None)
        if region is None:
            raise ValidationError(f"no region with id {rid}")
        if region.pinned:
            raise ValidationError(f"region {rid} ({region.name!r}) is pinned and cannot actuate")
        new = ActuationSignal.from_dict_list(msg["harmonics"])
        new.harmonics.sort(key=lambda h: h.frequency)
        for prev, cur in zip(new.harmonics, new.harmonics[1:]):
            if cur.frequency <= prev.frequency:
                cur.frequency = prev.frequency + 1e-6
        new.validate()
        reanchor_phases(self.signals.get(rid, ActuationSignal.zero()), new, self.state.time)
        self.signals[rid] = new
        if "amplitude_scale" in msg:
            scale = float(msg["amplitude_scale"])
            if scale < 0:
                raise ValidationError("amplitude_scale must be non-negative")
            region.amplitude_scale = scale
        self.rests = self.scene.rest_table(self.signals, self.svc.clamp_epsilon)

    def install_signals(self, signals: dict[int, ActuationSignal]) -> None:
        """Adopt externally tuned signals, keeping the modulation continuous."""
        t = self.state.time
        for rid, sig in signals.items():
            old = self.signals.get(rid, ActuationSignal.zero())
            self.signals[rid] = reanchor_phases(old, sig.copy(), t)
        self.rests = self.scene.rest_table(self.signals, self.svc.clamp_epsilon)

    # ---- per-connection handling ----------------------------------------

    async def handler(self, websocket):
        queue: asyncio.Queue = asyncio.Queue(maxsize=self.svc.queue_limit)
        self.clients[websocket] = queue
        sender = asyncio.create_task(_drain(websocket, queue))
        try:
            await websocket.send(
                encode(
                    hello_message(
                        mesh=self.scene.mesh,
                        binding=self.scene.binding,
                        regions=self.regions,
                        dt=self.cfg.dt,
                        particle_regions=self.state.lattice.particle_region,
                        particles=self.scene.lattice.positions,
                    )
                )
            )
            async for text in websocket:
                try:
                    msg = decode_client(text)
                except ProtocolError as exc:
                    _offer(queue, encode(error_message(str(exc))))
                    continue
                await self.commands.put((websocket, msg))
        except ConnectionClosed:
            pass
        finally:
            sender.cancel()
            self.clients.pop(websocket, None)

    # ---- background tuning ----------------------------------------------

    def start_tuning(self, track: KeyframeTrack, anneal_cfg: AnnealConfig) -> None:
        """Run the annealer on a worker thread, streaming tune_progress and
        installing the best signals when it finishes."""
        if self._tune_thread is not None and self._tune_thread.is_alive():
            raise ValidationError("a tuning run is already in progress")
        loop = asyncio.get_running_loop()

        def progress(it, current, best, temperature):
            text = encode(tune_progress_message(it, current, best, temperature))
            loop.call_soon_threadsafe(self._broadcast, text)

        def work():
            try:
                result = anneal(
                    self.scene, track, self.cfg, anneal_cfg,
                    signals=None, on_iteration=progress,
                )
            except Exception as exc:  # surfaced to clients, never crashes the loop
                loop.call_soon_threadsafe(
                    self._broadcast, encode(error_message(f"tuning failed: {exc}"))
                )
                return
            loop.call_soon_threadsafe(self.install_signals, result.best_signals)

        self._tune_thread = threading.Thread(target=work, daemon=True)
        self._tune_thread.start()


def _offer(queue: asyncio.Queue, text: str) -> None:
    """Enqueue without blocking; a full queue sheds its oldest entry."""
    while True:
        try:
            queue.put_nowait(text)
            return
        except asyncio.QueueFull:
            try:
                queue.get_nowait()
            except asyncio.QueueEmpty:
                pass


async def _drain(websocket, queue: asyncio.Queue) -> None:
    try:
        while True:
            await websocket.send(await queue.get())
    except (ConnectionClosed, asyncio.CancelledError):
        pass


async def serve_scene(
    scene: Scene,
    cfg: SimConfig,
    svc: ServiceConfig,
    tune_track: KeyframeTrack | None = None,
    anneal_cfg: AnnealConfig | None = None,
) -> None:
    """Run the service until cancelled. Prints the bound address once
    listening (port 0 picks a free port)."""
    service = SteeringService(scene, cfg, svc)
    async with ws_serve(service.handler, svc.host, svc.port) as server:
        port = server.sockets[0].getsockname()[1]
        print(f"listening on ws://{svc.host}:{port}", flush=True)
        loop_task = asyncio.create_task(service.run_loop())
        if tune_track is not None:
            service.start_tuning(tune_track, anneal_cfg or AnnealConfig())
        try:
            await asyncio.Future()
        finally:
            loop_task.cancel()
