/**
 * Trajectory and manifest files in the analyzer's dataset format.
 *
 * Schema version 1: one JSON object per trajectory with meta, hidden_dim,
 * states (T+1 rows), optional token_ids (length T) and token_distributions
 * (T rows summing to 1 within 1e-6), plus a manifest.json listing the
 * decoding grid and member files.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

export const SCHEMA_VERSION = 1;
export const MANIFEST_NAME = 'manifest.json';
export const DIST_SUM_TOL = 1e-6;

export type TrajectoryMeta = {
  model_id: string;
  prompt: string;
  sample_id: string;
  temperature: number;
  top_p: number;
  layer_index: number;
};

export type TrajectoryDoc = {
  schema_version: number;
  meta: TrajectoryMeta;
  hidden_dim: number;
  states: number[][];
  token_ids: number[];
  token_distributions: number[][];
};

export type Cell = [number, number];

/** Fail fast on anything the analyzer's loader would reject. */
export function checkTrajectoryDoc(doc: TrajectoryDoc): void {
  const { states, token_ids, token_distributions, hidden_dim } = doc;
  if (states.length < 2) {
    throw new Error(`trajectory ${doc.meta.sample_id} has ${states.length} states, need >= 2`);
  }
  for (const row of states) {
    if (row.length !== hidden_dim) {
      throw new Error(`state row of length ${row.length} does not match hidden_dim ${hidden_dim}`);
    }
    for (const x of row) {
      if (!Number.isFinite(x)) throw new Error('states contain a non-finite entry');
    }
  }
  const steps = states.length - 1;
  if (token_ids.length !== steps) {
    throw new Error(`token_ids length ${token_ids.length} != T=${steps}`);
  }
  if (token_distributions.length !== steps) {
    throw new Error(`token_distributions length ${token_distributions.length} != T=${steps}`);
  }
  for (const dist of token_distributions) {
    let sum = 0;
    for (const p of dist) {
      if (!(p >= 0)) throw new Error('token distribution has a negative or non-finite entry');
      sum += p;
    }
    if (Math.abs(sum - 1) > DIST_SUM_TOL) {
      throw new Error(`token distribution sums to ${sum}, not 1 within ${DIST_SUM_TOL}`);
    }
  }
}

export function writeTrajectory(filePath: string, doc: TrajectoryDoc): void {
  checkTrajectoryDoc(doc);
  fs.writeFileSync(filePath, JSON.stringify(doc) + '\n');
}

export function readTrajectory(filePath: string): TrajectoryDoc {
  return JSON.parse(fs.readFileSync(filePath, 'utf8')) as TrajectoryDoc;
}

export function writeManifest(dir: string, grid: Cell[], files: string[]): string {
  const manifest = {
    schema_version: SCHEMA_VERSION,
    grid: grid.map(([t, p]) => [t, p]),
    files
  };
  const manifestPath = path.join(dir, MANIFEST_NAME);
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + '\n');
  return manifestPath;
}
