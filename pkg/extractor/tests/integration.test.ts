/**
 * Cross-component check: a real extraction must load cleanly in the analyzer
 * package and yield finite positive continuity. Requires the analyzer to be
 * installed for python3 (pip install -e .. from this directory's parent).
 */

import { execFileSync } from 'node:child_process';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

import { afterAll, describe, expect, it } from 'vitest';

import { gridSweep } from '../src/extract.js';
import type { Cell } from '../src/trajectory.js';

const VALIDATE_SNIPPET = `
import sys
from latdyn.metrics import continuity
from latdyn.model import validate_dataset

dataset = validate_dataset(sys.argv[1])
print(len(dataset.trajectories))
for traj in sorted(dataset.trajectories, key=lambda t: t.meta.sample_id):
    print(traj.meta.sample_id, traj.dim, traj.num_steps, continuity(traj).continuity)
`;

const outDir = fs.mkdtempSync(path.join(os.tmpdir(), 'extract-integration-'));
afterAll(() => fs.rmSync(outDir, { recursive: true, force: true }));

describe('analyzer round trip', () => {
  it('a 1-cell, 2-sample, 20-token extraction passes validation with positive C', () => {
    const result = gridSweep({
      modelId: 'tiny-char-16x2',
      prompt: 'The future of AI is',
      nSamples: 2,
      maxNewTokens: 20,
      grid: [[0.7, 0.8]] as Cell[],
      outDir
    });
    expect(result.files).toHaveLength(2);
    expect(result.failures).toEqual([]);

    const output = execFileSync('python3', ['-c', VALIDATE_SNIPPET, outDir], {
      encoding: 'utf8'
    });
    const lines = output.trim().split('\n');
    expect(lines[0]).toBe('2');
    expect(lines).toHaveLength(3);
    for (const line of lines.slice(1)) {
      const [sampleId, dim, steps, c] = line.split(' ');
      expect(sampleId).toMatch(/^c00-s0[01]$/);
      expect(Number(dim)).toBe(16);
      expect(Number(steps)).toBeGreaterThanOrEqual(1);
      const value = Number(c);
      expect(Number.isFinite(value)).toBe(true);
      expect(value).toBeGreaterThan(0);
    }
  });
});
