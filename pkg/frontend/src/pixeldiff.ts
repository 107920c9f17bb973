/** Byte-level comparison helpers for reconstruction panes. */

export interface DiffSummary {
  /** number of pixels whose RGBA bytes differ */
  changedPixels: number;
  totalPixels: number;
  /** fraction in [0, 1] */
  changedFraction: number;
  identical: boolean;
}

/** Compare two RGBA byte buffers of equal length pixel by pixel. */
export function diffRgba(a: Uint8ClampedArray, b: Uint8ClampedArray): DiffSummary {
  if (a.length !== b.length || a.length % 4 !== 0) {
    throw new Error(`buffers must be equal-length RGBA, got ${a.length} vs ${b.length}`);
  }
  const totalPixels = a.length / 4;
  let changedPixels = 0;
  for (let p = 0; p < a.length; p += 4) {
    if (a[p] !== b[p] || a[p + 1] !== b[p + 1] || a[p + 2] !== b[p + 2] || a[p + 3] !== b[p + 3]) {
      changedPixels += 1;
    }
  }
  return {
    changedPixels,
    totalPixels,
    changedFraction: totalPixels > 0 ? changedPixels / totalPixels : 0,
    identical: changedPixels === 0,
  };
}

/** True when two base64 payloads are byte-identical. */
export function base64Equal(a: string, b: string): boolean {
  return a === b;
}
