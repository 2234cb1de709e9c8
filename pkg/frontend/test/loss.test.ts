import { describe, expect, it } from "vitest";

import { Rng } from "../src/rng.js";
import { Tensor } from "../src/tensor.js";
import { bceMean, bceOfConstant } from "../src/loss.js";

describe("binary cross entropy", () => {
  it("is ~0 when prediction equals the target (after clamping)", () => {
    const target = Float64Array.of(0, 1, 1, 0, 1);
    const pred = new Tensor(Float64Array.from(target), [5]);
    expect(bceMean(pred, target).item()).toBeLessThanOrEqual(1e-6);
  });

  it("equals ln 2 for a constant 0.5 prediction", () => {
    const rng = new Rng(7);
    const target = Float64Array.from({ length: 64 }, () => (rng.next() < 0.3 ? 1 : 0));
    const pred = new Tensor(new Float64Array(64).fill(0.5), [64]);
    expect(Math.abs(bceMean(pred, target).item() - Math.log(2))).toBeLessThanOrEqual(1e-12);
  });

  it("matches a scalar-loop reference on random 8x8 inputs", () => {
    const rng = new Rng(11);
    const n = 64;
    const pred = new Float64Array(n);
    const target = new Float64Array(n);
    for (let i = 0; i < n; i++) {
      pred[i] = 1e-7 + (1 - 2e-7) * rng.next();
      target[i] = rng.next() < 0.5 ? 0 : 1;
    }
    // independent elementwise loop
    let expected = 0;
    for (let i = 0; i < n; i++) {
      expected += -(target[i] * Math.log(pred[i]) + (1 - target[i]) * Math.log(1 - pred[i]));
    }
    expected /= n;
    const got = bceMean(new Tensor(pred, [n]), target).item();
    expect(Math.abs(got - expected)).toBeLessThanOrEqual(1e-10);
  });

  it("gradient matches finite differences", () => {
    const rng = new Rng(13);
    const n = 16;
    const values = Float64Array.from({ length: n }, () => 0.05 + 0.9 * rng.next());
    const target = Float64Array.from({ length: n }, () => (rng.next() < 0.5 ? 0 : 1));
    const pred = new Tensor(values, [n], true);
    const loss = bceMean(pred, target);
    loss.backward();
    const h = 1e-7;
    for (const i of [0, 5, 15]) {
      const up = values.slice();
      up[i] += h;
      const down = values.slice();
      down[i] -= h;
      const fd =
        (bceMean(new Tensor(up, [n]), target).item() -
          bceMean(new Tensor(down, [n]), target).item()) /
        (2 * h);
      expect(Math.abs(pred.grad![i] - fd) / Math.abs(fd)).toBeLessThanOrEqual(1e-6);
    }
  });

  it("constant-predictor reference handles all-background targets", () => {
    const ce = bceOfConstant(0.1, [new Float64Array(16)]);
    expect(Math.abs(ce + Math.log(0.9))).toBeLessThanOrEqual(1e-12);
  });
});
