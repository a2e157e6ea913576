/**
 * Client-side linear blend skinning.
 *
 * The server streams particle positions only; vertices are reconstructed
 * here with the binding from the hello message. The formula mirrors the
 * server's: v = sum_k w_k * p_{i_k} + offset.
 */

export interface Binding {
  indices: number[][];
  weights: number[][];
  offsets: number[][];
}

const WEIGHT_SUM_TOLERANCE = 1e-6;

/**
 * Reject bindings that cannot produce a faithful render: ragged rows,
 * negative weights, rows that do not sum to one, or particle indices out
 * of range. Throws with a human-readable reason.
 */
export function validateBinding(binding: Binding, particleCount: number): void {
  const { indices, weights, offsets } = binding;
  const rows = indices.length;
  if (weights.length !== rows || offsets.length !== rows) {
    throw new Error(
      `binding tables disagree: ${rows} index rows, ${weights.length} weight rows, ${offsets.length} offsets`,
    );
  }
  for (let v = 0; v < rows; v++) {
    const idx = indices[v];
    const w = weights[v];
    if (idx.length !== w.length || idx.length === 0) {
      throw new Error(`binding row ${v} is ragged`);
    }
    let sum = 0;
    for (let k = 0; k < w.length; k++) {
      if (!(w[k] >= 0)) {
        throw new Error(`binding row ${v} has a negative or non-finite weight`);
      }
      sum += w[k];
      const p = idx[k];
      if (!Number.isInteger(p) || p < 0 || p >= particleCount) {
        throw new Error(`binding row ${v} references particle ${p} of ${particleCount}`);
      }
    }
    if (Math.abs(sum - 1) > WEIGHT_SUM_TOLERANCE) {
      throw new Error(`binding row ${v} weights sum to ${sum}, expected 1`);
    }
    if (offsets[v].length !== 3) {
      throw new Error(`binding row ${v} offset is not a 3-vector`);
    }
  }
}

/**
 * Skin all vertices from particle positions into `out` (flat xyz, length
 * 3 * vertexCount). Allocates when `out` is omitted.
 */
export function skinVertices(
  binding: Binding,
  particles: number[][],
  out?: Float64Array,
): Float64Array {
  const rows = binding.indices.length;
  const result = out ?? new Float64Array(rows * 3);
  for (let v = 0; v < rows; v++) {
    const idx = binding.indices[v];
    const w = binding.weights[v];
    const offset = binding.offsets[v];
    let x = offset[0];
    let y = offset[1];
    let z = offset[2];
    for (let k = 0; k < idx.length; k++) {
      const p = particles[idx[k]];
      x += w[k] * p[0];
      y += w[k] * p[1];
      z += w[k] * p[2];
    }
    result[3 * v] = x;
    result[3 * v + 1] = y;
    result[3 * v + 2] = z;
  }
  return result;
}
