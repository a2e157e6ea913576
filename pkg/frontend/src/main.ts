/**
 * Browser entry point: wires the WebSocket, the session, the 3D view, and
 * the steering controls together.
 *
 * The server URL defaults to the serving host and can be overridden with
 * ?server=ws://host:port. Sliders commit on release (one message per
 * commit); clicking the mesh sends a poke along the view ray.
 */

import { pickMesh } from "./pick";
import { FrameMessage, Harmonic, HelloMessage, RegionInfo } from "./protocol";
import { ClientSession, Transport } from "./session";
import { OrganView } from "./view";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function serverUrl(): string {
  const override = new URLSearchParams(window.location.search).get("server");
  if (override) return override;
  const host = window.location.hostname || "127.0.0.1";
  return `ws://${host}:8765`;
}

class SocketTransport implements Transport {
  constructor(private readonly socket: WebSocket) {}

  get open(): boolean {
    return this.socket.readyState === WebSocket.OPEN;
  }

  send(text: string): void {
    this.socket.send(text);
  }
}

const canvas = el<HTMLCanvasElement>("viewport");
const view = new OrganView(canvas);
const statusLine = el<HTMLElement>("status");
const energyLine = el<HTMLElement>("energy");
const tuneLine = el<HTMLElement>("tune");
const errorLine = el<HTMLElement>("errors");
const regionSelect = el<HTMLSelectElement>("region");
const controls = el<HTMLElement>("controls");

let latestVertices: Float64Array | null = null;
let latestHello: HelloMessage | null = null;
let paused = false;

const session = new ClientSession({
  onHello(hello) {
    latestHello = hello;
    view.buildMesh(hello);
    statusLine.textContent =
      `${hello.mesh.name}: ${hello.particles.length} particles, ` +
      `${hello.mesh.vertices.length} vertices, dt ${hello.dt.toExponential(2)} s`;
  },
  onFrame(frame: FrameMessage, skinned: Float64Array) {
    latestVertices = skinned;
    view.updateVertices(skinned);
    energyLine.textContent =
      `step ${frame.step}  t ${frame.t.toFixed(3)} s  energy ${frame.energy.toExponential(3)} J`;
  },
  onError(message) {
    errorLine.textContent = message;
    rebuildControls();
  },
  onTuneProgress(iteration, objective, best, temperature) {
    tuneLine.textContent =
      `tune iter ${iteration + 1}: objective ${objective.toFixed(6)} ` +
      `best ${best.toFixed(6)} T ${temperature.toFixed(5)}`;
  },
  onRegionsChanged() {
    rebuildControls();
  },
});

function slider(
  label: string,
  min: number,
  max: number,
  step: number,
  value: number,
  commit: (value: number) => void,
): HTMLElement {
  const row = document.createElement("label");
  row.className = "control-row";
  const text = document.createElement("span");
  text.textContent = `${label} ${value.toFixed(3)}`;
  const input = document.createElement("input");
  input.type = "range";
  input.min = String(min);
  input.max = String(max);
  input.step = String(step);
  input.value = String(value);
  input.addEventListener("input", () => {
    text.textContent = `${label} ${Number(input.value).toFixed(3)}`;
  });
  // "change" fires on release only: one protocol message per commit.
  input.addEventListener("change", () => commit(Number(input.value)));
  row.append(text, input);
  return row;
}

function selectedRegion(): RegionInfo | undefined {
  return session.region(Number(regionSelect.value));
}

function rebuildControls(): void {
  const regions = session.regionList();
  const selected = regionSelect.value;
  regionSelect.replaceChildren(
    ...regions.map((r) => {
      const option = document.createElement("option");
      option.value = String(r.id);
      option.textContent = `${r.id}: ${r.name}${r.pinned ? " (pinned)" : ""}`;
      return option;
    }),
  );
  if (regions.some((r) => String(r.id) === selected)) regionSelect.value = selected;

  controls.replaceChildren();
  const region = selectedRegion();
  if (!region) return;
  if (region.pinned) {
    const note = document.createElement("p");
    note.textContent = "pinned region: holds still, no actuation";
    controls.append(note);
    return;
  }

  const harmonic: Harmonic = region.harmonics[0] ?? { a: 0, f: 1, phi: 0 };
  const commit = (patch: Partial<Harmonic>) => {
    const next = { ...harmonic, ...patch };
    // Phase is advisory: the server re-anchors it to keep motion continuous.
    session.commitParams(region.id, next.a === 0 ? [] : [next]);
  };
  controls.append(
    slider("amplitude", 0, 0.45, 0.005, harmonic.a, (a) => commit({ a })),
    slider("frequency (Hz)", 0.1, 6, 0.05, harmonic.f, (f) => commit({ f })),
    slider("phase (rad)", 0, 6.28, 0.01, harmonic.phi, (phi) => commit({ phi })),
    slider("amplitude scale", 0, 2, 0.01, region.amplitude_scale, (scale) =>
      session.commitParams(region.id, region.harmonics, scale),
    ),
  );
}

regionSelect.addEventListener("change", rebuildControls);

el<HTMLButtonElement>("pause").addEventListener("click", () => {
  paused = !paused;
  if (paused) session.pause();
  else session.resume();
  el<HTMLButtonElement>("pause").textContent = paused ? "resume" : "pause";
});
el<HTMLButtonElement>("reset").addEventListener("click", () => session.reset());

const pokeForce = el<HTMLInputElement>("poke-force");
const pokeRadius = el<HTMLInputElement>("poke-radius");

canvas.addEventListener("click", (e) => {
  if (view.isDragging || !latestHello || !latestVertices) return;
  const ray = view.rayAt(e.clientX, e.clientY);
  const verts: number[][] = [];
  for (let v = 0; v < latestVertices.length / 3; v++) {
    verts.push([latestVertices[3 * v], latestVertices[3 * v + 1], latestVertices[3 * v + 2]]);
  }
  const hit = pickMesh(ray.origin, ray.direction, verts, latestHello.mesh.triangles);
  if (!hit) return;
  const magnitude = Number(pokeForce.value);
  session.poke(
    hit.point,
    [ray.direction[0] * magnitude, ray.direction[1] * magnitude, ray.direction[2] * magnitude],
    Number(pokeRadius.value),
    0.25,
  );
});

const socket = new WebSocket(serverUrl());
socket.addEventListener("open", () => {
  session.attach(new SocketTransport(socket));
  errorLine.textContent = "";
});
socket.addEventListener("message", (event) => {
  try {
    session.handleText(String(event.data));
  } catch (err) {
    errorLine.textContent = `bad server message: ${(err as Error).message}`;
  }
});
socket.addEventListener("close", () => {
  session.detach();
  statusLine.textContent = "disconnected";
});

function frameLoop(): void {
  view.render();
  requestAnimationFrame(frameLoop);
}
frameLoop();
