/**
 * Temperature and nucleus (top-p) sampling over full-vocabulary logits.
 *
 * The distribution actually sampled from is also the one recorded in the
 * trajectory file: renormalized over the full vocabulary after the top-p
 * filter, with zeros outside the nucleus.
 */

import type { Rng } from './rng.js';

const GREEDY_TEMPERATURE = 1e-6;

function softmax(logits: number[]): number[] {
  let max = -Infinity;
  for (const x of logits) if (x > max) max = x;
  const exps = logits.map((x) => Math.exp(x - max));
  let z = 0;
  for (const e of exps) z += e;
  return exps.map((e) => e / z);
}

function oneHotArgmax(logits: number[]): number[] {
  let best = 0;
  for (let i = 1; i < logits.length; i++) {
    if (logits[i] > logits[best]) best = i;
  }
  const out = new Array<number>(logits.length).fill(0);
  out[best] = 1;
  return out;
}

/**
 * Probabilities after temperature scaling and top-p filtering, over the full
 * vocabulary. Entries outside the nucleus are exactly 0 and the rest are
 * renormalized to sum to 1. Temperatures at or below 1e-6 mean greedy.
 */
export function sampleDistribution(logits: number[], temperature: number, topP: number): number[] {
  if (!(temperature >= 0) || !Number.isFinite(temperature)) {
    throw new Error(`temperature must be non-negative and finite, got ${temperature}`);
  }
  if (!(topP > 0 && topP <= 1)) {
    throw new Error(`top_p must be in (0, 1], got ${topP}`);
  }
  if (temperature <= GREEDY_TEMPERATURE) return oneHotArgmax(logits);

  const probs = softmax(logits.map((x) => x / temperature));
  const order = probs.map((_, i) => i).sort((a, b) => probs[b] - probs[a] || a - b);

  // Smallest prefix with cumulative probability >= top_p; the top token is
  // always kept so the nucleus is never empty.
  let cum = 0;
  let cut = order.length;
  for (let r = 0; r < order.length; r++) {
    cum += probs[order[r]];
    if (cum >= topP) {
      cut = r + 1;
      break;
    }
  }

  const out = new Array<number>(probs.length).fill(0);
  let kept = 0;
  for (let r = 0; r < cut; r++) kept += probs[order[r]];
  for (let r = 0; r < cut; r++) out[order[r]] = probs[order[r]] / kept;
  return out;
}

/** Draw one index from a probability vector. */
export function sampleIndex(probs: number[], rng: Rng): number {
  const u = rng();
  let cum = 0;
  let lastPositive = 0;
  for (let i = 0; i < probs.length; i++) {
    if (probs[i] <= 0) continue;
    lastPositive = i;
    cum += probs[i];
    if (u < cum) return i;
  }
  // Rounding can leave cum fractionally below 1; fall back to the last
  // positive-probability index.
  return lastPositive;
}
