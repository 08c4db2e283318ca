/**
 * Deterministic 32-bit PRNG and string hashing.
 *
 * Every random draw in the extractor flows through these two functions, so a
 * (model, prompt, cell, sample) tuple always reproduces identical bytes.
 */

export type Rng = () => number;

/** mulberry32: fast 32-bit generator, uniform in [0, 1). */
export function mulberry32(seed: number): Rng {
  let t = seed >>> 0;
  return () => {
    t = (t + 0x6d2b79f5) >>> 0;
    let r = Math.imul(t ^ (t >>> 15), t | 1);
    r ^= r + Math.imul(r ^ (r >>> 7), r | 61);
    return ((r ^ (r >>> 14)) >>> 0) / 4294967296;
  };
}

/** FNV-1a 32-bit hash of a string. */
export function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

/** Seed for one sampled continuation, keyed by everything that defines it. */
export function sampleSeed(
  modelId: string,
  prompt: string,
  temperature: number,
  topP: number,
  sampleIndex: number
): number {
  return fnv1a(`${modelId}|${prompt}|${temperature}|${topP}|${sampleIndex}`);
}
