/**
 * Command line for the inverse models.
 *
 *   node dist/cli.js train --container DIR --arch gat_res_unet --out runs/a \
 *        [--snr-db 20] [--nr 32] [--epochs 100] [--batch 32] [--seed 0]
 *   node dist/cli.js evaluate --checkpoint runs/a/checkpoint.json \
 *        --container DIR [--snr-db 20] [--out runs/a/eval] [--dump 0,1,2]
 */

import { parseArgs } from "node:util";

import { evaluate } from "./evaluate.js";
import { train } from "./train.js";
import { Architecture } from "./model.js";

const ARCHITECTURES: Architecture[] = ["unet", "resnet_unet", "gat_res_unet"];

function fail(message: string): never {
  process.stderr.write(`error: ${message}\n`);
  process.exit(2);
}

function cmdTrain(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      container: { type: "string" },
      arch: { type: "string", default: "gat_res_unet" },
      out: { type: "string" },
      "snr-db": { type: "string" },
      nr: { type: "string" },
      epochs: { type: "string", default: "100" },
      batch: { type: "string", default: "32" },
      lr: { type: "string", default: "0.001" },
      patience: { type: "string", default: "10" },
      seed: { type: "string", default: "0" },
      "max-train": { type: "string" },
    },
  });
  if (!values.container || !values.out) fail("--container and --out are required");
  const arch = values.arch as Architecture;
  if (!ARCHITECTURES.includes(arch)) fail(`--arch must be one of ${ARCHITECTURES.join(", ")}`);
  const result = train({
    architecture: arch,
    containerDir: values.container,
    outDir: values.out,
    snrDb: values["snr-db"] !== undefined ? Number(values["snr-db"]) : Infinity,
    receiverCount: values.nr !== undefined ? Number(values.nr) : undefined,
    epochs: Number(values.epochs),
    batchSize: Number(values.batch),
    learningRate: Number(values.lr),
    patience: Number(values.patience),
    seed: Number(values.seed),
    maxTrainRecords: values["max-train"] !== undefined ? Number(values["max-train"]) : undefined,
  });
  process.stdout.write(
    JSON.stringify({
      checkpoint: result.checkpointPath,
      metrics: result.metricsPath,
      best_test_ce: result.bestTestLoss,
      epochs: result.epochsRun,
      steps: result.stepsRun,
    }) + "\n",
  );
}

function cmdEvaluate(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      checkpoint: { type: "string" },
      container: { type: "string" },
      "snr-db": { type: "string" },
      "noise-seed": { type: "string", default: "0" },
      out: { type: "string" },
      dump: { type: "string" },
    },
  });
  if (!values.checkpoint || !values.container) {
    fail("--checkpoint and --container are required");
  }
  const result = evaluate({
    checkpointPath: values.checkpoint,
    containerDir: values.container,
    snrDb: values["snr-db"] !== undefined ? Number(values["snr-db"]) : Infinity,
    noiseSeed: Number(values["noise-seed"]),
    outDir: values.out,
    dumpSamples: values.dump ? values.dump.split(",").map(Number) : undefined,
  });
  process.stdout.write(
    JSON.stringify({
      test_ce: result.testCe,
      records: result.records,
      grid: result.gridPath,
    }) + "\n",
  );
}

const [command, ...rest] = process.argv.slice(2);
switch (command) {
  case "train":
    cmdTrain(rest);
    break;
  case "evaluate":
    cmdEvaluate(rest);
    break;
  default:
    fail("usage: cli.js <train|evaluate> [flags]");
}
