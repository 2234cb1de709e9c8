/** Pixel-wise binary cross entropy, mean-reduced, with probability clamping. */

import { Tensor } from "./tensor.js";

export const PROB_CLAMP = 1e-7;

/**
 * Mean over all elements of -[y log p + (1-y) log(1-p)], with p clamped to
 * [PROB_CLAMP, 1 - PROB_CLAMP]. Targets are 0/1 and not differentiated.
 */
export function bceMean(pred: Tensor, target: Float64Array): Tensor {
  if (pred.size !== target.length) throw new Error("bceMean: size mismatch");
  const n = pred.size;
  const lo = PROB_CLAMP;
  const hi = 1 - PROB_CLAMP;
  let acc = 0;
  for (let i = 0; i < n; i++) {
    const p = Math.min(hi, Math.max(lo, pred.data[i]));
    const y = target[i];
    acc += y > 0 ? -Math.log(p) : -Math.log(1 - p);
  }
  const out = new Tensor(Float64Array.of(acc / n), [1]);
  out.parents = [pred];
  out.backfn = () => {
    const g = out.grad![0] / n;
    const gp = pred.ensureGrad();
    for (let i = 0; i < n; i++) {
      const raw = pred.data[i];
      if (raw <= lo || raw >= hi) continue; // clamped region: zero slope
      const y = target[i];
      gp[i] += g * (y > 0 ? -1 / raw : 1 / (1 - raw));
    }
  };
  return out;
}

/** Plain-number BCE of a constant prediction against a target set. */
export function bceOfConstant(p: number, targets: Float64Array[]): number {
  const lo = PROB_CLAMP;
  const hi = 1 - PROB_CLAMP;
  const pc = Math.min(hi, Math.max(lo, p));
  let acc = 0;
  let count = 0;
  for (const t of targets) {
    for (let i = 0; i < t.length; i++) {
      acc += t[i] > 0 ? -Math.log(pc) : -Math.log(1 - pc);
    }
    count += t.length;
  }
  return acc / count;
}
