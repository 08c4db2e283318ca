/**
 * extract - dump latent trajectories over a decoding grid.
 *
 * Usage:
 *   trajectory-extract --out DIR [--model ID] [--prompt TEXT]
 *                      [--grid-file FILE] [--samples N] [--tokens N] [--layer K]
 *
 * Exit codes: 0 success, 2 input error, 3 some cells failed (the rest are in
 * the manifest), 1 internal error.
 */

import * as fs from 'node:fs';
import { parseArgs } from 'node:util';

import { DEFAULT_MODEL_ID } from './model.js';
import { gridSweep, type ExtractionJob } from './extract.js';
import type { Cell } from './trajectory.js';

export const DEFAULT_PROMPT = 'The future of AI is';

/** The default sweep: 10 temperatures 0.1..2.0 by 4 top-p values. */
export function defaultGrid(): Cell[] {
  const grid: Cell[] = [];
  for (let i = 0; i < 10; i++) {
    const t = Math.round((0.1 + (1.9 * i) / 9) * 1e6) / 1e6;
    for (const p of [0.3, 0.6, 0.8, 1.0]) grid.push([t, p]);
  }
  return grid;
}

function parseGridFile(file: string): Cell[] {
  let doc: unknown;
  try {
    doc = JSON.parse(fs.readFileSync(file, 'utf8'));
  } catch (err) {
    throw new Error(`grid file ${file}: ${err instanceof Error ? err.message : String(err)}`);
  }
  if (Array.isArray(doc)) {
    return doc.map((pair) => {
      if (!Array.isArray(pair) || pair.length !== 2) {
        throw new Error(`grid file ${file}: entries must be [temperature, top_p] pairs`);
      }
      return [Number(pair[0]), Number(pair[1])];
    });
  }
  if (doc !== null && typeof doc === 'object' && 'temperatures' in doc && 'top_p' in doc) {
    const { temperatures, top_p } = doc as { temperatures: number[]; top_p: number[] };
    const grid: Cell[] = [];
    for (const t of temperatures) for (const p of top_p) grid.push([Number(t), Number(p)]);
    return grid;
  }
  throw new Error(
    `grid file ${file}: expected a list of pairs or {"temperatures": [...], "top_p": [...]}`
  );
}

function positiveInt(value: string, name: string): number {
  const n = Number(value);
  if (!Number.isInteger(n) || n < 1) throw new Error(`--${name} must be a positive integer`);
  return n;
}

export function main(argv: string[]): number {
  let job: ExtractionJob;
  try {
    const { values } = parseArgs({
      args: argv,
      options: {
        model: { type: 'string', default: DEFAULT_MODEL_ID },
        prompt: { type: 'string', default: DEFAULT_PROMPT },
        'grid-file': { type: 'string' },
        samples: { type: 'string', default: '10' },
        tokens: { type: 'string', default: '100' },
        layer: { type: 'string' },
        out: { type: 'string' }
      }
    });
    if (!values.out) throw new Error('--out is required');
    job = {
      modelId: values.model as string,
      prompt: values.prompt as string,
      nSamples: positiveInt(values.samples as string, 'samples'),
      maxNewTokens: positiveInt(values.tokens as string, 'tokens'),
      grid: values['grid-file'] ? parseGridFile(values['grid-file'] as string) : defaultGrid(),
      layerIndex: values.layer === undefined ? undefined : Number(values.layer),
      outDir: values.out as string
    };
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 2;
  }

  try {
    const result = gridSweep(job);
    console.log(
      `wrote ${result.written} files, kept ${result.skipped}, ` +
        `${result.grid.length} cells in ${result.manifestPath}`
    );
    if (result.failures.length > 0) {
      for (const f of result.failures) {
        console.error(`failed cell (temperature=${f.cell[0]}, top_p=${f.cell[1]}): ${f.error}`);
      }
      return 3;
    }
    return 0;
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    console.error(`error: ${message}`);
    // Everything gridSweep raises describes bad input (model id, job limits,
    // grid contents); genuine bugs surface as stack traces instead.
    return err instanceof Error ? 2 : 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === `file://${process.argv[1]}`;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
