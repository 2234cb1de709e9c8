import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import {
  addAwgn,
  edgeDistanceMatrix,
  loadDataset,
  readRecords,
  subsampleIndices,
} from "../src/data.js";
import { Rng } from "../src/rng.js";

const root = path.dirname(path.dirname(fileURLToPath(import.meta.url)));
const FIXTURE = path.join(root, "fixtures", "shapes96");

describe("container reading", () => {
  it("reads every record with targets and vectors", () => {
    const { manifest, records } = readRecords(FIXTURE);
    expect(records.length).toBe(manifest.record_count);
    expect(manifest.n_receivers).toBe(64);
    for (const rec of records.slice(0, 5)) {
      expect(rec.e.length).toBe(128);
      expect(rec.target.length).toBe(manifest.image_height * manifest.image_width);
      for (const v of rec.target) expect(v === 0 || v === 1).toBe(true);
    }
  });

  it("splits follow the stored assignment and both exist", () => {
    const data = loadDataset(FIXTURE);
    expect(data.train.length + data.test.length).toBe(data.manifest.record_count);
    expect(data.train.length).toBeGreaterThan(0);
    expect(data.test.length).toBeGreaterThan(0);
  });

  it("detects chunk corruption", () => {
    const tmp = fs.mkdtempSync("/tmp/rfscat-fixture-");
    fs.cpSync(FIXTURE, tmp, { recursive: true });
    const chunkDir = path.join(tmp, "chunks");
    const chunk = path.join(chunkDir, fs.readdirSync(chunkDir)[0]);
    const blob = fs.readFileSync(chunk);
    blob[64] ^= 0xff;
    fs.writeFileSync(chunk, blob);
    expect(() => readRecords(tmp)).toThrow(/CRC32/);
    fs.rmSync(tmp, { recursive: true });
  });

  it("fails cleanly without a manifest", () => {
    expect(() => readRecords("/tmp/definitely-not-a-container")).toThrow(/manifest/);
  });
});

describe("receiver subsampling", () => {
  it("keeps equally spaced receivers", () => {
    expect(subsampleIndices(64, 16)).toEqual(
      Array.from({ length: 16 }, (_, k) => 4 * k),
    );
    expect(() => subsampleIndices(64, 48)).toThrow(/divide/);
  });

  it("subsampled features match the stored vectors", () => {
    const { records } = readRecords(FIXTURE);
    const full = loadDataset(FIXTURE);
    const sub = loadDataset(FIXTURE, { receiverCount: 16 });
    expect(sub.nReceivers).toBe(16);
    const raw = records.find((r) => r.index === sub.train[0].index)!;
    const scale = sub.inputScale;
    expect(scale).toBeCloseTo(full.inputScale, 12);
    for (let k = 0; k < 16; k++) {
      expect(sub.train[0].receivedVector[2 * k]).toBeCloseTo(
        raw.e[2 * (4 * k)] / scale,
        12,
      );
      expect(sub.train[0].nodeFeatures[4 * k + 2]).toBeCloseTo(
        raw.eIncident[2 * (4 * k)] / scale,
        12,
      );
    }
  });

  it("edge distances are symmetric with zero diagonal and fixed size", () => {
    const data = loadDataset(FIXTURE, { receiverCount: 8 });
    const d = data.edgeDist;
    expect(d.shape).toEqual([8, 8]);
    for (let i = 0; i < 8; i++) {
      expect(d.data[i * 8 + i]).toBe(0);
      for (let j = 0; j < 8; j++) {
        expect(d.data[i * 8 + j]).toBeCloseTo(d.data[j * 8 + i], 14);
        expect(d.data[i * 8 + j]).toBeLessThanOrEqual(1.0 + 1e-12); // normalized
      }
    }
  });
});

describe("load-time noise", () => {
  it("hits the target SNR within 0.1 dB over 1e5 samples", () => {
    const rng = new Rng(5);
    const n = 100_000;
    const e = new Float64Array(2 * n);
    for (let i = 0; i < e.length; i++) e[i] = rng.gaussian();
    for (const snr of [0, 10, 20, 30]) {
      const noisy = addAwgn(e, snr, 1234 + snr);
      let ps = 0;
      let pn = 0;
      for (let i = 0; i < n; i++) {
        ps += e[2 * i] ** 2 + e[2 * i + 1] ** 2;
        const dr = noisy[2 * i] - e[2 * i];
        const di = noisy[2 * i + 1] - e[2 * i + 1];
        pn += dr * dr + di * di;
      }
      const measured = 10 * Math.log10(ps / pn);
      expect(Math.abs(measured - snr)).toBeLessThanOrEqual(0.1);
    }
  });

  it("is deterministic given the seed and a no-op at infinite SNR", () => {
    const e = Float64Array.of(1, 2, 3, 4);
    expect(addAwgn(e, 10, 7)).toEqual(addAwgn(e, 10, 7));
    expect(addAwgn(e, Infinity, 7)).toEqual(e);
    expect(addAwgn(e, 10, 7)).not.toEqual(addAwgn(e, 10, 8));
  });

  it("noisy features change while targets stay fixed", () => {
    const clean = loadDataset(FIXTURE);
    const noisy = loadDataset(FIXTURE, { snrDb: 0, noiseSeed: 3 });
    expect(noisy.train[0].nodeFeatures).not.toEqual(clean.train[0].nodeFeatures);
    expect(noisy.train[0].target).toEqual(clean.train[0].target);
    // incident-field columns are untouched by receiver noise
    for (let k = 0; k < 64; k++) {
      expect(noisy.train[0].nodeFeatures[4 * k + 2]).toBeCloseTo(
        clean.train[0].nodeFeatures[4 * k + 2], 12,
      );
      expect(noisy.train[0].nodeFeatures[4 * k + 3]).toBeCloseTo(
        clean.train[0].nodeFeatures[4 * k + 3], 12,
      );
    }
  });
});

describe("edge distance helper", () => {
  it("computes pairwise euclidean distances over the ring", () => {
    const positions: [number, number][] = [
      [1, 0], [0, 1], [-1, 0], [0, -1],
    ];
    const d = edgeDistanceMatrix(positions, 2);
    expect(d.data[0 * 4 + 2]).toBeCloseTo(1.0, 14); // diameter / 2
    expect(d.data[0 * 4 + 1]).toBeCloseTo(Math.SQRT2 / 2, 14);
  });
});
