/**
 * Ray-triangle picking over the raw mesh arrays (Moller-Trumbore).
 *
 * Kept independent of the render library so the poke tool's geometry can
 * be tested against hand-computed intersections.
 */

export interface PickHit {
  point: [number, number, number];
  distance: number;
  triangle: number;
}

const EPSILON = 1e-12;

function sub(a: number[], b: number[]): [number, number, number] {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: number[], b: number[]): [number, number, number] {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function dot(a: number[], b: number[]): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

/**
 * Closest intersection of the ray with any mesh triangle, or null.
 * Back faces count: a poke through a gap should land on the far wall.
 */
export function pickMesh(
  origin: [number, number, number],
  direction: [number, number, number],
  vertices: number[][],
  triangles: number[][],
): PickHit | null {
  let best: PickHit | null = null;
  for (let f = 0; f < triangles.length; f++) {
    const [ia, ib, ic] = triangles[f];
    const a = vertices[ia];
    const edge1 = sub(vertices[ib], a);
    const edge2 = sub(vertices[ic], a);
    const h = cross(direction, edge2);
    const det = dot(edge1, h);
    if (Math.abs(det) < EPSILON) continue; // ray parallel to triangle
    const inv = 1 / det;
    const s = sub(origin, a);
    const u = inv * dot(s, h);
    if (u < 0 || u > 1) continue;
    const q = cross(s, edge1);
    const v = inv * dot(direction, q);
    if (v < 0 || u + v > 1) continue;
    const t = inv * dot(edge2, q);
    if (t <= EPSILON) continue; // behind the origin
    if (best === null || t < best.distance) {
      best = {
        distance: t,
        triangle: f,
        point: [
          origin[0] + t * direction[0],
          origin[1] + t * direction[1],
          origin[2] + t * direction[2],
        ],
      };
    }
  }
  return best;
}
