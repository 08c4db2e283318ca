/**
 * TinyCharLM - deterministic char-level causal transformer.
 *
 * A fixed-seed, randomly initialized stand-in for a small public model: the
 * model_id seeds every weight, so the same id always yields the same network
 * and generation needs no checkpoint files or network access. Architecture:
 * token + sinusoidal position embeddings, pre-norm single-head causal
 * self-attention blocks with a two-layer MLP, tied embedding readout.
 */

import { mulberry32, fnv1a, type Rng } from './rng.js';

/** Printable ASCII 32..126 plus one end-of-sequence token. */
const FIRST_CHAR = 32;
const LAST_CHAR = 126;
export const VOCAB_SIZE = LAST_CHAR - FIRST_CHAR + 1 + 1;
export const EOS_ID = VOCAB_SIZE - 1;

export const DEFAULT_MODEL_ID = 'tiny-char-16x2';
const MODEL_ID_PATTERN = /^tiny-char-(\d+)x(\d+)$/;
const CONTEXT_SIZE = 32;

export function encodePrompt(text: string): number[] {
  const ids: number[] = [];
  for (let i = 0; i < text.length; i++) {
    const code = text.charCodeAt(i);
    if (code < FIRST_CHAR || code > LAST_CHAR) {
      throw new Error(
        `prompt contains unsupported character ${JSON.stringify(text[i])} at position ${i}`
      );
    }
    ids.push(code - FIRST_CHAR);
  }
  return ids;
}

export function decodeTokens(ids: number[]): string {
  let out = '';
  for (const id of ids) {
    if (id === EOS_ID) break;
    out += String.fromCharCode(id + FIRST_CHAR);
  }
  return out;
}

type LayerWeights = {
  wq: number[][];
  wk: number[][];
  wv: number[][];
  wo: number[][];
  w1: number[][];
  w2: number[][];
};

/** Forward-pass result at the last context position. */
export type ForwardResult = {
  /** layerStates[0] is the embedding+position vector; [l] is after block l. */
  layerStates: number[][];
  logits: number[];
};

function initMatrix(rng: Rng, rows: number, cols: number, scale: number): number[][] {
  const m: number[][] = [];
  for (let i = 0; i < rows; i++) {
    const row = new Array<number>(cols);
    for (let j = 0; j < cols; j++) row[j] = (rng() - 0.5) * 2 * scale;
    m.push(row);
  }
  return m;
}

/** out[j] = sum_i x[i] * w[i][j]; w is [in][out]. */
function matVec(x: number[], w: number[][]): number[] {
  const cols = w[0].length;
  const out = new Array<number>(cols).fill(0);
  for (let i = 0; i < x.length; i++) {
    const xi = x[i];
    if (xi === 0) continue;
    const row = w[i];
    for (let j = 0; j < cols; j++) out[j] += xi * row[j];
  }
  return out;
}

function rmsNorm(v: number[]): number[] {
  let ss = 0;
  for (const x of v) ss += x * x;
  const inv = 1 / Math.sqrt(ss / v.length + 1e-6);
  return v.map((x) => x * inv);
}

function dot(a: number[], b: number[]): number {
  let s = 0;
  for (let i = 0; i < a.length; i++) s += a[i] * b[i];
  return s;
}

export class TinyCharLM {
  readonly modelId: string;
  readonly hiddenSize: number;
  readonly numLayers: number;
  readonly contextSize = CONTEXT_SIZE;

  private embedding: number[][];
  private positions: number[][];
  private layers: LayerWeights[];

  constructor(modelId: string, hiddenSize: number, numLayers: number) {
    this.modelId = modelId;
    this.hiddenSize = hiddenSize;
    this.numLayers = numLayers;

    const rng = mulberry32(fnv1a(modelId));
    const d = hiddenSize;
    this.embedding = initMatrix(rng, VOCAB_SIZE, d, 1 / Math.sqrt(d));
    this.layers = [];
    const scale = Math.sqrt(2 / d);
    for (let l = 0; l < numLayers; l++) {
      this.layers.push({
        wq: initMatrix(rng, d, d, scale),
        wk: initMatrix(rng, d, d, scale),
        wv: initMatrix(rng, d, d, scale),
        wo: initMatrix(rng, d, d, scale),
        w1: initMatrix(rng, d, 2 * d, scale),
        w2: initMatrix(rng, 2 * d, d, Math.sqrt(1 / d))
      });
    }

    this.positions = [];
    for (let pos = 0; pos < CONTEXT_SIZE; pos++) {
      const p = new Array<number>(d);
      for (let i = 0; i < d; i++) {
        const angle = pos / Math.pow(10000, (2 * Math.floor(i / 2)) / d);
        p[i] = i % 2 === 0 ? Math.sin(angle) : Math.cos(angle);
      }
      this.positions.push(p);
    }
  }

  /**
   * Run the network over the trailing context window and return the hidden
   * state after every layer at the last position, plus next-token logits.
   */
  forward(ctx: number[]): ForwardResult {
    if (ctx.length === 0) throw new Error('forward requires a non-empty context');
    const window = ctx.slice(-this.contextSize);
    const n = window.length;
    const d = this.hiddenSize;

    let hidden: number[][] = [];
    for (let i = 0; i < n; i++) {
      const emb = this.embedding[window[i]];
      const pos = this.positions[i];
      const v = new Array<number>(d);
      for (let j = 0; j < d; j++) v[j] = emb[j] + pos[j];
      hidden.push(v);
    }

    const last = n - 1;
    const layerStates: number[][] = [hidden[last].slice()];

    for (const layer of this.layers) {
      const normed = hidden.map(rmsNorm);
      const q = normed.map((h) => matVec(h, layer.wq));
      const k = normed.map((h) => matVec(h, layer.wk));
      const v = normed.map((h) => matVec(h, layer.wv));
      const invSqrt = 1 / Math.sqrt(d);

      const attended: number[][] = [];
      for (let i = 0; i < n; i++) {
        // Causal mask: position i attends to 0..i only.
        const scores = new Array<number>(i + 1);
        let max = -Infinity;
        for (let j = 0; j <= i; j++) {
          scores[j] = dot(q[i], k[j]) * invSqrt;
          if (scores[j] > max) max = scores[j];
        }
        let z = 0;
        for (let j = 0; j <= i; j++) {
          scores[j] = Math.exp(scores[j] - max);
          z += scores[j];
        }
        const mix = new Array<number>(d).fill(0);
        for (let j = 0; j <= i; j++) {
          const w = scores[j] / z;
          for (let c = 0; c < d; c++) mix[c] += w * v[j][c];
        }
        attended.push(matVec(mix, layer.wo));
      }

      const afterAttn = hidden.map((h, i) => h.map((x, c) => x + attended[i][c]));
      const next: number[][] = [];
      for (let i = 0; i < n; i++) {
        const a = matVec(rmsNorm(afterAttn[i]), layer.w1).map((x) => Math.max(0, x));
        const m = matVec(a, layer.w2);
        next.push(afterAttn[i].map((x, c) => x + m[c]));
      }
      hidden = next;
      layerStates.push(hidden[last].slice());
    }

    const readout = rmsNorm(hidden[last]);
    const logits = new Array<number>(VOCAB_SIZE);
    for (let t = 0; t < VOCAB_SIZE; t++) logits[t] = dot(this.embedding[t], readout);
    return { layerStates, logits };
  }
}

/**
 * Instantiate a model by id. Ids name the architecture family and size,
 * tiny-char-<hidden>x<layers>; anything else fails to load.
 */
export function loadModel(modelId: string): TinyCharLM {
  const match = MODEL_ID_PATTERN.exec(modelId);
  if (!match) {
    throw new Error(
      `unknown model ${JSON.stringify(modelId)}: expected tiny-char-<hidden>x<layers>`
    );
  }
  const hiddenSize = parseInt(match[1], 10);
  const numLayers = parseInt(match[2], 10);
  if (hiddenSize < 2 || hiddenSize > 512) {
    throw new Error(`model hidden size ${hiddenSize} out of range [2, 512]`);
  }
  if (numLayers < 1 || numLayers > 8) {
    throw new Error(`model layer count ${numLayers} out of range [1, 8]`);
  }
  return new TinyCharLM(modelId, hiddenSize, numLayers);
}
