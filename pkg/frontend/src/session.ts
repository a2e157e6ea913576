/**
 * Connection-independent client state.
 *
 * The session consumes decoded server messages and produces outgoing wire
 * text through an injected transport, so the whole steering flow is
 * testable without a browser or a socket. The server is authoritative:
 * optimistic slider state is reverted when the server reports an error,
 * and snapshot replies reconcile region parameters wholesale.
 */

import {
  ClientMessage,
  FrameMessage,
  Harmonic,
  HelloMessage,
  RegionInfo,
  encodeClientMessage,
  parseServerMessage,
  pokeMessage,
  setParamsMessage,
} from "./protocol";
import { skinVertices, validateBinding } from "./skinning";

export interface Transport {
  readonly open: boolean;
  send(text: string): void;
}

export interface SessionEvents {
  onHello?(hello: HelloMessage): void;
  onFrame?(frame: FrameMessage, skinned: Float64Array): void;
  onError?(message: string): void;
  onTuneProgress?(iteration: number, objective: number, best: number, temperature: number): void;
  onRegionsChanged?(regions: RegionInfo[]): void;
}

interface CommittedChange {
  region: number;
  previous: RegionInfo;
}

export class ClientSession {
  hello: HelloMessage | null = null;
  /** Step index of the newest rendered frame; frames at or below it are stale. */
  lastStep = -1;
  lastFrame: FrameMessage | null = null;
  renderable = false;

  private transport: Transport | null = null;
  private readonly pending: string[] = [];
  private readonly regions = new Map<number, RegionInfo>();
  private lastCommit: CommittedChange | null = null;
  private skinBuffer: Float64Array | null = null;

  constructor(private readonly events: SessionEvents = {}) {}

  attach(transport: Transport): void {
    this.transport = transport;
    this.flush();
  }

  detach(): void {
    this.transport = null;
  }

  get queuedCount(): number {
    return this.pending.length;
  }

  regionList(): RegionInfo[] {
    return [...this.regions.values()].sort((a, b) => a.id - b.id);
  }

  region(id: number): RegionInfo | undefined {
    return this.regions.get(id);
  }

  handleText(text: string): void {
    const msg = parseServerMessage(text);
    switch (msg.type) {
      case "hello": {
        this.hello = msg;
        this.lastStep = -1;
        this.lastFrame = null;
        this.regions.clear();
        for (const region of msg.regions) this.regions.set(region.id, region);
        try {
          validateBinding(msg.binding, msg.particles.length);
          this.renderable = true;
        } catch (err) {
          this.renderable = false;
          this.events.onError?.(`render refused: ${(err as Error).message}`);
        }
        this.skinBuffer = new Float64Array(msg.mesh.vertices.length * 3);
        this.events.onHello?.(msg);
        this.events.onRegionsChanged?.(this.regionList());
        break;
      }
      case "frame": {
        if (!this.hello || !this.renderable) return;
        if (msg.step <= this.lastStep) return; // stale frame, never move backwards
        this.lastStep = msg.step;
        this.lastFrame = msg;
        const skinned = skinVertices(this.hello.binding, msg.positions, this.skinBuffer!);
        this.events.onFrame?.(msg, skinned);
        break;
      }
      case "error": {
        this.revertLastCommit();
        this.events.onError?.(msg.message);
        break;
      }
      case "tune_progress": {
        this.events.onTuneProgress?.(msg.iteration, msg.objective, msg.best, msg.temperature);
        break;
      }
      case "snapshot": {
        this.reconcileFromSnapshot(msg.scene);
        break;
      }
    }
  }

  /** One committed slider/params change: one wire message, optimistic update. */
  commitParams(regionId: number, harmonics: Harmonic[], amplitudeScale?: number): void {
    const current = this.regions.get(regionId);
    if (current) {
      this.lastCommit = { region: regionId, previous: current };
      const next: RegionInfo = {
        ...current,
        harmonics: harmonics.map((h) => ({ ...h })),
      };
      if (amplitudeScale !== undefined) next.amplitude_scale = amplitudeScale;
      this.regions.set(regionId, next);
      this.events.onRegionsChanged?.(this.regionList());
    }
    this.send(setParamsMessage(regionId, harmonics, amplitudeScale));
  }

  poke(
    point: [number, number, number],
    force: [number, number, number],
    radius: number,
    duration: number,
  ): void {
    this.send(pokeMessage(point, force, radius, duration));
  }

  pause(): void {
    this.send({ type: "pause" });
  }

  resume(): void {
    this.send({ type: "resume" });
  }

  reset(): void {
    this.send({ type: "reset" });
  }

  requestSnapshot(): void {
    this.send({ type: "snapshot" });
  }

  private send(msg: ClientMessage): void {
    const text = encodeClientMessage(msg);
    if (this.transport && this.transport.open) {
      this.transport.send(text);
    } else {
      this.pending.push(text); // flushed on reconnect
    }
  }

  private flush(): void {
    if (!this.transport || !this.transport.open) return;
    while (this.pending.length > 0) {
      this.transport.send(this.pending.shift()!);
    }
  }

  private revertLastCommit(): void {
    if (!this.lastCommit) return;
    const { region, previous } = this.lastCommit;
    this.lastCommit = null;
    if (this.regions.has(region)) {
      this.regions.set(region, previous);
      this.events.onRegionsChanged?.(this.regionList());
    }
  }

  private reconcileFromSnapshot(scene: Record<string, unknown>): void {
    const raw = scene["regions"];
    if (!Array.isArray(raw)) return;
    let changed = false;
    for (const entry of raw) {
      if (typeof entry !== "object" || entry === null) continue;
      const rec = entry as Record<string, unknown>;
      const id = rec["id"];
      if (typeof id !== "number" || !this.regions.has(id)) continue;
      const current = this.regions.get(id)!;
      const next: RegionInfo = { ...current };
      if (Array.isArray(rec["actuation"])) {
        next.harmonics = (rec["actuation"] as Harmonic[]).map((h) => ({ ...h }));
      }
      if (typeof rec["amplitude_scale"] === "number") {
        next.amplitude_scale = rec["amplitude_scale"];
      }
      this.regions.set(id, next);
      changed = true;
    }
    this.lastCommit = null; // server state adopted; nothing left to revert
    if (changed) this.events.onRegionsChanged?.(this.regionList());
  }
}
