/** Consensus baseline on the client: strict-majority mask and the union region
 * it omits, used for the "omitted by consensus" overlay. */

import type { Gray } from "./types.js";

export function majorityOmitted(masks: Gray[]): Gray | undefined {
  if (masks.length === 0) return undefined;
  const { width, height } = masks[0];
  const values = new Uint8ClampedArray(width * height);
  const half = masks.length / 2;
  for (let i = 0; i < values.length; i++) {
    let votes = 0;
    for (const mask of masks) {
      if (mask.values[i] > 127) votes++;
    }
    const inUnion = votes > 0;
    const inMajority = votes > half;
    values[i] = inUnion && !inMajority ? 255 : 0;
  }
  return { width, height, values };
}
