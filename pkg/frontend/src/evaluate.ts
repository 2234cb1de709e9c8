/**
 * Checkpoint evaluation: mean test BCE under a chosen noise/receiver
 * configuration, plus side-by-side target/prediction reconstruction dumps.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { loadDataset } from "./data.js";
import { bceMean } from "./loss.js";
import { Checkpoint, loadParams } from "./model.js";
import { reconstructionGrid } from "./pgm.js";
import { batchTargets } from "./train.js";

export interface EvaluateOptions {
  checkpointPath: string;
  containerDir: string;
  snrDb?: number;
  noiseSeed?: number;
  outDir?: string;
  /** test-set positions to render, in order */
  dumpSamples?: number[];
  batchSize?: number;
}

export interface EvaluateResult {
  testCe: number;
  records: number;
  gridPath: string | null;
}

export function evaluate(options: EvaluateOptions): EvaluateResult {
  const checkpoint = JSON.parse(
    fs.readFileSync(options.checkpointPath, "utf-8"),
  ) as Checkpoint;
  const model = loadParams(checkpoint);
  const dataset = loadDataset(options.containerDir, {
    receiverCount: checkpoint.config.nReceivers,
    snrDb: options.snrDb ?? Infinity,
    noiseSeed: options.noiseSeed ?? 0,
  });
  model.edgeDist = dataset.edgeDist;

  const batchSize = options.batchSize ?? 32;
  const samples = dataset.test.length ? dataset.test : dataset.train;
  let acc = 0;
  const predictions = new Map<number, Float64Array>();
  for (let start = 0; start < samples.length; start += batchSize) {
    const batch = samples.slice(start, start + batchSize);
    const pred = model.forward(batch);
    acc += bceMean(pred, batchTargets(batch)).item() * batch.length;
    const width = batch[0].target.length;
    batch.forEach((s, i) => {
      predictions.set(start + i, pred.data.slice(i * width, (i + 1) * width));
    });
  }
  const testCe = acc / samples.length;

  let gridPath: string | null = null;
  if (options.outDir && options.dumpSamples && options.dumpSamples.length) {
    fs.mkdirSync(options.outDir, { recursive: true });
    const pairs = options.dumpSamples
      .filter((i) => i >= 0 && i < samples.length)
      .map((i) => ({ target: samples[i].target, prediction: predictions.get(i)! }));
    const grid = reconstructionGrid(
      pairs,
      checkpoint.config.height,
      checkpoint.config.width,
    );
    gridPath = path.join(options.outDir, "reconstructions.pgm");
    fs.writeFileSync(gridPath, grid);
  }
  return { testCe, records: samples.length, gridPath };
}
