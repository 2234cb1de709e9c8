import { describe, expect, it } from "vitest";

import { Rng } from "../src/rng.js";
import { Tensor, matmul } from "../src/tensor.js";
import { GatLayerParams, gatAttention, gatLayer } from "../src/model.js";

const N = 12;
const F = 4;
const D = 6;

function randomTensor(rng: Rng, shape: number[], scale = 1, requiresGrad = false): Tensor {
  const data = new Float64Array(shape.reduce((a, b) => a * b, 1));
  for (let i = 0; i < data.length; i++) data[i] = scale * rng.gaussian();
  return new Tensor(data, shape, requiresGrad);
}

function randomParams(rng: Rng, f = F, d = D): GatLayerParams {
  return {
    thetaS: randomTensor(rng, [f, d], 0.5, true),
    thetaT: randomTensor(rng, [f, d], 0.5, true),
    wS: randomTensor(rng, [d, 1], 0.5, true),
    wT: randomTensor(rng, [d, 1], 0.5, true),
    wE: randomTensor(rng, [d, 1], 0.5, true),
    thetaE: randomTensor(rng, [1, d], 0.5, true),
  };
}

function symmetricDistances(rng: Rng, n = N): Tensor {
  const pts = Array.from({ length: n }, () => [rng.next(), rng.next()]);
  const data = new Float64Array(n * n);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      data[i * n + j] = Math.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
    }
  }
  return new Tensor(data, [n, n]);
}

describe("graph attention layer", () => {
  it("attention rows sum to one", () => {
    const rng = new Rng(1);
    const x = randomTensor(rng, [N, F]);
    const dist = symmetricDistances(rng);
    const { attention } = gatAttention(x, dist, randomParams(rng), 0.2);
    for (let i = 0; i < N; i++) {
      let sum = 0;
      for (let j = 0; j < N; j++) sum += attention.data[i * N + j];
      expect(Math.abs(sum - 1)).toBeLessThanOrEqual(1e-6);
    }
  });

  it("zero weights give uniform attention and mean aggregation", () => {
    const rng = new Rng(2);
    const x = randomTensor(rng, [N, F]);
    const dist = symmetricDistances(rng);
    const params = randomParams(rng);
    for (const z of [params.wS, params.wT, params.wE]) z.data.fill(0);
    const { attention } = gatAttention(x, dist, params, 0.2);
    for (let i = 0; i < N * N; i++) {
      expect(Math.abs(attention.data[i] - 1 / N)).toBeLessThanOrEqual(1e-12);
    }
    const out = gatLayer(x, dist, params, 0.2);
    const embed = matmul(x, params.thetaT);
    for (let col = 0; col < D; col++) {
      let mean = 0;
      for (let j = 0; j < N; j++) mean += embed.data[j * D + col];
      mean /= N;
      for (let i = 0; i < N; i++) {
        expect(Math.abs(out.data[i * D + col] - mean)).toBeLessThanOrEqual(1e-12);
      }
    }
  });

  it("is equivariant under receiver permutation", () => {
    const rng = new Rng(3);
    const x = randomTensor(rng, [N, F]);
    const dist = symmetricDistances(rng);
    const params = randomParams(rng);
    const out = gatLayer(x, dist, params, 0.2);

    const perm = new Rng(99).shuffle([...Array(N).keys()]);
    const xPerm = Tensor.zeros([N, F]);
    const distPerm = Tensor.zeros([N, N]);
    for (let i = 0; i < N; i++) {
      for (let f = 0; f < F; f++) xPerm.data[i * F + f] = x.data[perm[i] * F + f];
      for (let j = 0; j < N; j++) {
        distPerm.data[i * N + j] = dist.data[perm[i] * N + perm[j]];
      }
    }
    const outPerm = gatLayer(xPerm, distPerm, params, 0.2);
    for (let i = 0; i < N; i++) {
      for (let d = 0; d < D; d++) {
        expect(
          Math.abs(outPerm.data[i * D + d] - out.data[perm[i] * D + d]),
        ).toBeLessThanOrEqual(1e-10);
      }
    }
  });

  it("uses the scalar edge path (distance shifts logits)", () => {
    const rng = new Rng(4);
    const x = randomTensor(rng, [N, F]);
    const params = randomParams(rng);
    const near = symmetricDistances(rng);
    const far = new Tensor(
      Float64Array.from(near.data, (v) => v * 10),
      [N, N],
    );
    const a1 = gatAttention(x, near, params, 0.2).attention;
    const a2 = gatAttention(x, far, params, 0.2).attention;
    let diff = 0;
    for (let i = 0; i < N * N; i++) diff = Math.max(diff, Math.abs(a1.data[i] - a2.data[i]));
    expect(diff).toBeGreaterThan(1e-6);
  });
});
