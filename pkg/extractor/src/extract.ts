/**
 * Trajectory extraction: run the model over a decoding grid and dump one
 * file per sampled continuation, plus a dataset manifest.
 *
 * Generation is fully deterministic given (model_id, prompt, cell, sample
 * index), so an interrupted sweep can be resumed: files already on disk that
 * match their expected metadata are kept as-is, and a rerun of a finished
 * sweep rewrites nothing.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { loadModel, encodePrompt, EOS_ID, type TinyCharLM } from './model.js';
import { sampleDistribution, sampleIndex } from './sampling.js';
import { mulberry32, sampleSeed } from './rng.js';
import {
  writeTrajectory,
  readTrajectory,
  writeManifest,
  type Cell,
  type TrajectoryDoc
} from './trajectory.js';

export type ExtractionJob = {
  modelId: string;
  prompt: string;
  nSamples: number;
  maxNewTokens: number;
  grid: Cell[];
  /** 0 = embedding layer, k = after block k; defaults to the final layer. */
  layerIndex?: number;
  outDir: string;
};

export type CellFailure = {
  cell: Cell;
  error: string;
};

export type SweepResult = {
  /** Cells that produced all their samples, in grid order. */
  grid: Cell[];
  /** Manifest-listed file names, nSamples per successful cell. */
  files: string[];
  failures: CellFailure[];
  written: number;
  skipped: number;
  manifestPath: string;
};

export function validateJob(job: ExtractionJob): void {
  if (!Number.isInteger(job.nSamples) || job.nSamples < 1) {
    throw new Error(`n_samples must be a positive integer, got ${job.nSamples}`);
  }
  if (!Number.isInteger(job.maxNewTokens) || job.maxNewTokens < 1) {
    throw new Error(`max_new_tokens must be a positive integer, got ${job.maxNewTokens}`);
  }
  if (job.grid.length === 0) throw new Error('grid is empty');
}

function checkCell([temperature, topP]: Cell): void {
  if (!Number.isFinite(temperature) || temperature < 0) {
    throw new Error(`temperature must be non-negative and finite, got ${temperature}`);
  }
  if (!(topP > 0 && topP <= 1)) {
    throw new Error(`top_p must be in (0, 1], got ${topP}`);
  }
}

function resolveLayer(model: TinyCharLM, layerIndex: number | undefined): number {
  const layer = layerIndex ?? model.numLayers;
  if (!Number.isInteger(layer) || layer < 0 || layer > model.numLayers) {
    throw new Error(`layer_index ${layer} out of range [0, ${model.numLayers}]`);
  }
  return layer;
}

/**
 * Generate one continuation and return its trajectory document. The file
 * records T+1 hidden states for T emitted tokens; sampling the end token
 * truncates generation early with the actual T, and the document stays valid.
 */
export function extractRun(
  model: TinyCharLM,
  job: ExtractionJob,
  cell: Cell,
  sampleIdx: number,
  sampleId: string
): TrajectoryDoc {
  checkCell(cell);
  const [temperature, topP] = cell;
  const layer = resolveLayer(model, job.layerIndex);
  const rng = mulberry32(sampleSeed(model.modelId, job.prompt, temperature, topP, sampleIdx));

  const ctx = encodePrompt(job.prompt);
  if (ctx.length === 0) ctx.push(EOS_ID); // begin-of-sequence marker

  const states: number[][] = [];
  const tokenIds: number[] = [];
  const distributions: number[][] = [];
  for (let t = 0; t < job.maxNewTokens; t++) {
    const { layerStates, logits } = model.forward(ctx);
    states.push(layerStates[layer]);
    const dist = sampleDistribution(logits, temperature, topP);
    const token = sampleIndex(dist, rng);
    distributions.push(dist);
    tokenIds.push(token);
    ctx.push(token);
    if (token === EOS_ID) break;
  }
  states.push(model.forward(ctx).layerStates[layer]);

  return {
    schema_version: 1,
    meta: {
      model_id: model.modelId,
      prompt: job.prompt,
      sample_id: sampleId,
      temperature,
      top_p: topP,
      layer_index: layer
    },
    hidden_dim: model.hiddenSize,
    states,
    token_ids: tokenIds,
    token_distributions: distributions
  };
}

/** True when an on-disk file already holds this sample and can be kept. */
function matchesExpected(filePath: string, model: TinyCharLM, job: ExtractionJob,
                        cell: Cell, sampleId: string): boolean {
  let doc: TrajectoryDoc;
  try {
    doc = readTrajectory(filePath);
  } catch {
    return false;
  }
  const m = doc.meta;
  return (
    m !== undefined &&
    m.model_id === model.modelId &&
    m.prompt === job.prompt &&
    m.sample_id === sampleId &&
    m.temperature === cell[0] &&
    m.top_p === cell[1] &&
    m.layer_index === resolveLayer(model, job.layerIndex) &&
    doc.hidden_dim === model.hiddenSize
  );
}

/**
 * Run the whole grid. Cells that fail are left out of the manifest and
 * reported in the result; the caller decides the exit status.
 */
export function gridSweep(job: ExtractionJob): SweepResult {
  validateJob(job);
  const model = loadModel(job.modelId);
  resolveLayer(model, job.layerIndex);
  fs.mkdirSync(job.outDir, { recursive: true });

  const okCells: Cell[] = [];
  const files: string[] = [];
  const failures: CellFailure[] = [];
  let written = 0;
  let skipped = 0;

  for (let ci = 0; ci < job.grid.length; ci++) {
    const cell = job.grid[ci];
    const cellFiles: string[] = [];
    try {
      checkCell(cell);
      for (let si = 0; si < job.nSamples; si++) {
        const sampleId = `c${String(ci).padStart(2, '0')}-s${String(si).padStart(2, '0')}`;
        const name = `${sampleId}.json`;
        const filePath = path.join(job.outDir, name);
        if (fs.existsSync(filePath) && matchesExpected(filePath, model, job, cell, sampleId)) {
          skipped++;
        } else {
          writeTrajectory(filePath, extractRun(model, job, cell, si, sampleId));
          written++;
        }
        cellFiles.push(name);
      }
    } catch (err) {
      failures.push({ cell, error: err instanceof Error ? err.message : String(err) });
      continue;
    }
    okCells.push(cell);
    files.push(...cellFiles);
  }

  if (files.length === 0) {
    const detail = failures.map((f) => `(${f.cell[0]}, ${f.cell[1]}): ${f.error}`).join('; ');
    throw new Error(`every cell failed: ${detail}`);
  }
  const manifestPath = writeManifest(job.outDir, okCells, files);
  return { grid: okCells, files, failures, written, skipped, manifestPath };
}
