/**
 * Reader for the simulator's dataset containers (see ../docs/FORMAT.md) and
 * the feature pipeline: receiver subsampling, load-time AWGN, node-feature
 * matrices, and the fixed receiver-distance matrix.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { crc32 } from "./crc32.js";
import { Rng, hashSeed } from "./rng.js";
import { Tensor } from "./tensor.js";
import { GAT_FEATURES, SampleInput } from "./model.js";

export interface Manifest {
  format_version: number;
  recipe: string;
  record_count: number;
  wavelength: number;
  doi_radius: number;
  n_receivers: number;
  receiver_positions: [number, number][];
  image_height: number;
  image_width: number;
  chunks: { file: string; first_index: number; records: number }[];
  meta_sha256: string;
  [key: string]: unknown;
}

export interface RawRecord {
  index: number;
  split: "train" | "test";
  pointCount: number;
  /** interleaved re/im, length 2*N_r */
  e: Float64Array;
  eIncident: Float64Array;
  /** H*W of 0/1 */
  target: Float64Array;
}

export interface LoadOptions {
  /** receiver subset size; must divide the stored count */
  receiverCount?: number;
  /** AWGN level applied to e at load; Infinity = noise-free */
  snrDb?: number;
  /** seed stream for the noise */
  noiseSeed?: number;
}

export interface Dataset {
  manifest: Manifest;
  nReceivers: number;
  /** [n, n] receiver distances normalized by the domain side */
  edgeDist: Tensor;
  train: Sample[];
  test: Sample[];
}

export interface Sample extends SampleInput {
  index: number;
  target: Float64Array;
  pointCount: number;
}

function readJson(file: string): unknown {
  return JSON.parse(fs.readFileSync(file, "utf-8"));
}

export function readManifest(dir: string): Manifest {
  const file = path.join(dir, "manifest.json");
  if (!fs.existsSync(file)) throw new Error(`${dir}: manifest.json missing`);
  const manifest = readJson(file) as Manifest;
  if (manifest.format_version !== 1) {
    throw new Error(`${dir}: unsupported container format ${manifest.format_version}`);
  }
  return manifest;
}

export function readRecords(dir: string): { manifest: Manifest; records: RawRecord[] } {
  const manifest = readManifest(dir);
  const metaLines = fs
    .readFileSync(path.join(dir, "meta.jsonl"), "utf-8")
    .split("\n")
    .filter((line) => line.length > 0)
    .map((line) => JSON.parse(line));

  const nR = manifest.n_receivers;
  const planeBytes = Math.ceil((manifest.image_height * manifest.image_width) / 8);
  const recordBytes = 32 * nR + planeBytes;

  const records: RawRecord[] = [];
  let metaCursor = 0;
  for (const chunk of manifest.chunks) {
    const blob = fs.readFileSync(path.join(dir, chunk.file));
    const expected = chunk.records * recordBytes + 4;
    if (blob.length !== expected) {
      throw new Error(`${chunk.file}: expected ${expected} bytes, found ${blob.length}`);
    }
    const payload = Uint8Array.from(blob.subarray(0, blob.length - 4));
    const stored = new DataView(blob.buffer, blob.byteOffset + blob.length - 4, 4).getUint32(0, true);
    if (crc32(payload) !== stored) throw new Error(`${chunk.file}: CRC32 mismatch`);
    const view = new DataView(payload.buffer);
    for (let r = 0; r < chunk.records; r++) {
      const meta = metaLines[metaCursor++];
      const base = r * recordBytes;
      const e = new Float64Array(2 * nR);
      const eInc = new Float64Array(2 * nR);
      for (let i = 0; i < 2 * nR; i++) e[i] = view.getFloat64(base + 8 * i, true);
      for (let i = 0; i < 2 * nR; i++) {
        eInc[i] = view.getFloat64(base + 16 * nR + 8 * i, true);
      }
      const target = new Float64Array(manifest.image_height * manifest.image_width);
      const bitsBase = base + 32 * nR;
      for (let p = 0; p < target.length; p++) {
        const byte = payload[bitsBase + (p >> 3)];
        target[p] = (byte >> (7 - (p & 7))) & 1; // MSB-first packing
      }
      records.push({
        index: meta.index,
        split: meta.split,
        pointCount: meta.point_count,
        e,
        eIncident: eInc,
        target,
      });
    }
  }
  return { manifest, records };
}

export function subsampleIndices(stored: number, keep: number): number[] {
  if (keep < 1 || stored % keep !== 0) {
    throw new Error(`receiver filter ${keep} must divide the stored count ${stored}`);
  }
  const stride = stored / keep;
  return Array.from({ length: keep }, (_, k) => k * stride);
}

/** circularly-symmetric complex AWGN at a per-vector SNR, on interleaved re/im */
export function addAwgn(e: Float64Array, snrDb: number, seed: number): Float64Array {
  if (!isFinite(snrDb)) return e.slice();
  const n = e.length / 2;
  let power = 0;
  for (let i = 0; i < n; i++) power += e[2 * i] ** 2 + e[2 * i + 1] ** 2;
  power /= n;
  const sigma = Math.sqrt(power / Math.pow(10, snrDb / 10) / 2);
  const rng = new Rng(seed);
  const out = e.slice();
  for (let i = 0; i < out.length; i++) out[i] += sigma * rng.gaussian();
  return out;
}

export function edgeDistanceMatrix(
  positions: [number, number][],
  normalizer: number,
): Tensor {
  const n = positions.length;
  const data = new Float64Array(n * n);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const dx = positions[i][0] - positions[j][0];
      const dy = positions[i][1] - positions[j][1];
      data[i * n + j] = Math.hypot(dx, dy) / normalizer;
    }
  }
  return new Tensor(data, [n, n]);
}

/**
 * Load a container into train/test sample lists.
 *
 * Receiver subsampling happens first, then AWGN on the received vector
 * (seeded per record), then feature assembly. Node features follow the
 * fixed column order [Re e, Im e, Re e_inc, Im e_inc]. Both feature forms
 * are scaled by the shared dataset input scale computed over train records
 * (mean received magnitude), recorded in checkpoints for evaluation reuse.
 */
export function loadDataset(dir: string, options: LoadOptions = {}): Dataset & { inputScale: number } {
  const { manifest, records } = readRecords(dir);
  const stored = manifest.n_receivers;
  const keep = options.receiverCount ?? stored;
  const idx = subsampleIndices(stored, keep);
  const snrDb = options.snrDb ?? Infinity;
  const noiseSeed = options.noiseSeed ?? 0;

  const positions = idx.map((k) => manifest.receiver_positions[k]);
  const edgeDist = edgeDistanceMatrix(positions, 2 * manifest.doi_radius);

  // dataset-level input scale from noise-free train vectors
  let scaleAcc = 0;
  let scaleCount = 0;
  for (const rec of records) {
    if (rec.split !== "train") continue;
    for (const k of idx) {
      scaleAcc += Math.hypot(rec.e[2 * k], rec.e[2 * k + 1]);
      scaleCount++;
    }
  }
  const inputScale = scaleCount ? scaleAcc / scaleCount : 1;

  const train: Sample[] = [];
  const test: Sample[] = [];
  for (const rec of records) {
    const eFull = addAwgn(rec.e, snrDb, hashSeed(noiseSeed, rec.index));
    const node = new Float64Array(keep * GAT_FEATURES);
    const vec = new Float64Array(2 * keep);
    for (let r = 0; r < keep; r++) {
      const k = idx[r];
      const re = eFull[2 * k] / inputScale;
      const im = eFull[2 * k + 1] / inputScale;
      const reInc = rec.eIncident[2 * k] / inputScale;
      const imInc = rec.eIncident[2 * k + 1] / inputScale;
      node[r * GAT_FEATURES] = re;
      node[r * GAT_FEATURES + 1] = im;
      node[r * GAT_FEATURES + 2] = reInc;
      node[r * GAT_FEATURES + 3] = imInc;
      vec[2 * r] = re;
      vec[2 * r + 1] = im;
    }
    const sample: Sample = {
      index: rec.index,
      nodeFeatures: node,
      receivedVector: vec,
      target: rec.target,
      pointCount: rec.pointCount,
    };
    (rec.split === "train" ? train : test).push(sample);
  }
  return { manifest, nReceivers: keep, edgeDist, train, test, inputScale };
}
