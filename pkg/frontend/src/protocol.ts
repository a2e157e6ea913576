/**
 * Wire protocol for the steering service.
 *
 * Every message is one JSON object with a `type` field. Incoming server
 * messages are validated with zod before anything touches the scene graph;
 * outgoing client messages are built by the helpers at the bottom so each
 * UI commit maps to exactly one well-formed message.
 */

import { z } from "zod";

const vec3 = z.array(z.number()).length(3);
const matrix = z.array(z.array(z.number()));

export const harmonicSchema = z.object({
  a: z.number(),
  f: z.number(),
  phi: z.number(),
});

export const regionSchema = z.object({
  id: z.number().int(),
  name: z.string(),
  pinned: z.boolean(),
  amplitude_scale: z.number(),
  harmonics: z.array(harmonicSchema),
});

export const helloSchema = z.object({
  type: z.literal("hello"),
  dt: z.number().positive(),
  mesh: z.object({
    name: z.string(),
    vertices: z.array(vec3),
    triangles: z.array(z.array(z.number().int()).length(3)),
  }),
  binding: z.object({
    indices: z.array(z.array(z.number().int())),
    weights: matrix,
    offsets: z.array(vec3),
  }),
  regions: z.array(regionSchema),
  particle_regions: z.array(z.number().int()),
  particles: z.array(vec3),
});

export const frameSchema = z.object({
  type: z.literal("frame"),
  step: z.number().int().nonnegative(),
  t: z.number(),
  positions: z.array(vec3),
  energy: z.number(),
});

export const errorSchema = z.object({
  type: z.literal("error"),
  message: z.string(),
});

export const tuneProgressSchema = z.object({
  type: z.literal("tune_progress"),
  iteration: z.number().int(),
  objective: z.number(),
  best: z.number(),
  temperature: z.number(),
});

export const snapshotSchema = z.object({
  type: z.literal("snapshot"),
  scene: z.record(z.unknown()),
});

export const serverMessageSchema = z.discriminatedUnion("type", [
  helloSchema,
  frameSchema,
  errorSchema,
  tuneProgressSchema,
  snapshotSchema,
]);

export type Harmonic = z.infer<typeof harmonicSchema>;
export type RegionInfo = z.infer<typeof regionSchema>;
export type HelloMessage = z.infer<typeof helloSchema>;
export type FrameMessage = z.infer<typeof frameSchema>;
export type ServerMessage = z.infer<typeof serverMessageSchema>;

/** Parse one incoming text frame; throws ZodError on anything malformed. */
export function parseServerMessage(text: string): ServerMessage {
  return serverMessageSchema.parse(JSON.parse(text));
}

export interface SetParamsMessage {
  type: "set_params";
  region: number;
  harmonics: Harmonic[];
  amplitude_scale?: number;
}

export interface PokeMessage {
  type: "poke";
  point: [number, number, number];
  force: [number, number, number];
  radius: number;
  duration: number;
}

export type ClientMessage =
  | SetParamsMessage
  | PokeMessage
  | { type: "pause" }
  | { type: "resume" }
  | { type: "reset" }
  | { type: "snapshot" };

export function setParamsMessage(
  region: number,
  harmonics: Harmonic[],
  amplitudeScale?: number,
): SetParamsMessage {
  const msg: SetParamsMessage = { type: "set_params", region, harmonics };
  if (amplitudeScale !== undefined) msg.amplitude_scale = amplitudeScale;
  return msg;
}

export function pokeMessage(
  point: [number, number, number],
  force: [number, number, number],
  radius: number,
  duration: number,
): PokeMessage {
  if (!(radius > 0) || !(duration > 0)) {
    throw new Error("poke radius and duration must be positive");
  }
  return { type: "poke", point, force, radius, duration };
}

export function encodeClientMessage(msg: ClientMessage): string {
  return JSON.stringify(msg);
}
