/**
 * Training loop: Adam over batched BCE, per-epoch train/test scores logged
 * as line-delimited JSON, early stopping on test score, best checkpoint
 * saved as JSON.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { Adam } from "./adam.js";
import { Dataset, Sample, loadDataset } from "./data.js";
import { bceMean } from "./loss.js";
import {
  Architecture,
  Checkpoint,
  ModelConfig,
  ReconstructionModel,
  defaultConfig,
  saveParams,
} from "./model.js";
import { Rng } from "./rng.js";

export interface TrainOptions {
  architecture: Architecture;
  containerDir: string;
  outDir: string;
  snrDb?: number;
  receiverCount?: number;
  epochs?: number;
  batchSize?: number;
  learningRate?: number;
  patience?: number;
  seed?: number;
  maxTrainRecords?: number;
  /** stop as soon as train BCE goes below this (overfit harness) */
  targetTrainLoss?: number;
  maxSteps?: number;
  log?: (line: string) => void;
}

export interface TrainResult {
  checkpointPath: string;
  metricsPath: string;
  bestTestLoss: number;
  finalTrainLoss: number;
  epochsRun: number;
  stepsRun: number;
  reachedTarget: boolean;
}

export function batchTargets(batch: Sample[]): Float64Array {
  const width = batch[0].target.length;
  const out = new Float64Array(batch.length * width);
  batch.forEach((s, i) => out.set(s.target, i * width));
  return out;
}

export function evaluateLoss(model: ReconstructionModel, samples: Sample[], batchSize = 32): number {
  if (samples.length === 0) return NaN;
  let acc = 0;
  let count = 0;
  for (let start = 0; start < samples.length; start += batchSize) {
    const batch = samples.slice(start, start + batchSize);
    const pred = model.forward(batch);
    const loss = bceMean(pred, batchTargets(batch));
    acc += loss.item() * batch.length;
    count += batch.length;
  }
  return acc / count;
}

export function buildModel(options: TrainOptions, dataset: Dataset): ReconstructionModel {
  const config: ModelConfig = defaultConfig({
    architecture: options.architecture,
    nReceivers: dataset.nReceivers,
    height: dataset.manifest.image_height,
    width: dataset.manifest.image_width,
    seed: options.seed ?? 0,
  });
  const model = new ReconstructionModel(config);
  model.edgeDist = dataset.edgeDist;
  return model;
}

export function train(options: TrainOptions): TrainResult {
  const log = options.log ?? ((line: string) => process.stderr.write(line + "\n"));
  const dataset = loadDataset(options.containerDir, {
    receiverCount: options.receiverCount,
    snrDb: options.snrDb ?? Infinity,
    noiseSeed: options.seed ?? 0,
  });
  let trainSet = dataset.train;
  if (options.maxTrainRecords && trainSet.length > options.maxTrainRecords) {
    trainSet = trainSet.slice(0, options.maxTrainRecords);
  }
  if (trainSet.length === 0) throw new Error("no training records in container");

  const model = buildModel(options, dataset);
  const optimizer = new Adam(
    model.parameters().map((p) => p.tensor),
    { lr: options.learningRate ?? 1e-3 },
  );
  const batchSize = options.batchSize ?? 32;
  const epochs = options.epochs ?? 100;
  const patience = options.patience ?? 10;
  const maxSteps = options.maxSteps ?? Infinity;
  const rng = new Rng((options.seed ?? 0) ^ 0x5eed);

  fs.mkdirSync(options.outDir, { recursive: true });
  const metricsPath = path.join(options.outDir, "metrics.jsonl");
  const checkpointPath = path.join(options.outDir, "checkpoint.json");
  fs.writeFileSync(metricsPath, "");

  let best = Infinity;
  let bestSince = 0;
  let steps = 0;
  let lastTrain = NaN;
  let reachedTarget = false;
  let epoch = 0;

  for (; epoch < epochs; epoch++) {
    const order = rng.shuffle([...trainSet.keys()]);
    let epochLoss = 0;
    let seen = 0;
    for (let start = 0; start < order.length; start += batchSize) {
      const batch = order.slice(start, start + batchSize).map((i) => trainSet[i]);
      const pred = model.forward(batch);
      const loss = bceMean(pred, batchTargets(batch));
      if (!isFinite(loss.item())) {
        throw new Error(`non-finite training loss at step ${steps}`);
      }
      optimizer.zeroGrad();
      loss.backward();
      optimizer.step();
      epochLoss += loss.item() * batch.length;
      seen += batch.length;
      steps++;
      lastTrain = loss.item();
      // cheap gate on the batch loss before paying for a full train pass
      if (options.targetTrainLoss !== undefined && lastTrain < options.targetTrainLoss) {
        const full = evaluateLoss(model, trainSet, batchSize);
        if (full < options.targetTrainLoss) {
          reachedTarget = true;
          lastTrain = full;
          break;
        }
      }
      if (steps >= maxSteps) break;
    }
    const trainLoss = epochLoss / Math.max(seen, 1);
    const testLoss = evaluateLoss(model, dataset.test, batchSize);
    fs.appendFileSync(
      metricsPath,
      JSON.stringify({ epoch, train_ce: trainLoss, test_ce: testLoss, steps }) + "\n",
    );
    log(`epoch ${epoch}: train ${trainLoss.toFixed(4)} test ${isNaN(testLoss) ? "-" : testLoss.toFixed(4)}`);

    const monitored = isNaN(testLoss) ? trainLoss : testLoss;
    if (monitored < best - 1e-6) {
      best = monitored;
      bestSince = 0;
      fs.writeFileSync(
        checkpointPath,
        JSON.stringify(saveParams(model, dataset.inputScale)),
      );
    } else {
      bestSince++;
    }
    if (reachedTarget || steps >= maxSteps || bestSince > patience) break;
  }
  if (!fs.existsSync(checkpointPath) || fs.statSync(checkpointPath).size === 0) {
    fs.writeFileSync(checkpointPath, JSON.stringify(saveParams(model, dataset.inputScale)));
  }
  return {
    checkpointPath,
    metricsPath,
    bestTestLoss: best,
    finalTrainLoss: lastTrain,
    epochsRun: epoch + 1,
    stepsRun: steps,
    reachedTarget,
  };
}

/** Deterministic first-batch loss for a fresh model (reproducibility probe). */
export function initialLoss(options: TrainOptions): number {
  const dataset = loadDataset(options.containerDir, {
    receiverCount: options.receiverCount,
    snrDb: options.snrDb ?? Infinity,
    noiseSeed: options.seed ?? 0,
  });
  const model = buildModel(options, dataset);
  const batch = dataset.train.slice(0, options.batchSize ?? 32);
  const pred = model.forward(batch);
  return bceMean(pred, batchTargets(batch)).item();
}
