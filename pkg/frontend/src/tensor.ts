/**
 * Minimal float64 reverse-mode autograd over dense tensors.
 *
 * Tensors are row-major Float64Arrays with an explicit shape. Ops build a
 * computation graph; backward() runs the tape in reverse topological order.
 * Everything is double precision so finite-difference gradient checks are
 * meaningful at 1e-4 relative tolerance and below.
 */

export type Shape = readonly number[];

export function numel(shape: Shape): number {
  let n = 1;
  for (const d of shape) n *= d;
  return n;
}

let nextId = 0;

export class Tensor {
  readonly data: Float64Array;
  readonly shape: Shape;
  readonly requiresGrad: boolean;
  grad: Float64Array | null = null;
  /** populated by ops */
  parents: Tensor[] = [];
  backfn: (() => void) | null = null;
  readonly id: number;

  constructor(data: Float64Array, shape: Shape, requiresGrad = false) {
    if (data.length !== numel(shape)) {
      throw new Error(`data length ${data.length} != shape ${shape.join("x")}`);
    }
    this.data = data;
    this.shape = shape;
    this.requiresGrad = requiresGrad;
    this.id = nextId++;
  }

  static zeros(shape: Shape, requiresGrad = false): Tensor {
    return new Tensor(new Float64Array(numel(shape)), shape, requiresGrad);
  }

  static from(values: ArrayLike<number>, shape: Shape, requiresGrad = false): Tensor {
    return new Tensor(Float64Array.from(values), shape, requiresGrad);
  }

  get size(): number {
    return this.data.length;
  }

  ensureGrad(): Float64Array {
    if (!this.grad) this.grad = new Float64Array(this.size);
    return this.grad;
  }

  zeroGrad(): void {
    if (this.grad) this.grad.fill(0);
  }

  item(): number {
    if (this.size !== 1) throw new Error("item() needs a scalar tensor");
    return this.data[0];
  }

  /** Run reverse-mode accumulation from this scalar. */
  backward(): void {
    if (this.size !== 1) throw new Error("backward() needs a scalar loss");
    const order: Tensor[] = [];
    const seen = new Set<number>();
    const visit = (t: Tensor): void => {
      if (seen.has(t.id)) return;
      seen.add(t.id);
      for (const p of t.parents) visit(p);
      order.push(t);
    };
    visit(this);
    this.ensureGrad().fill(0);
    this.grad![0] = 1;
    for (let i = order.length - 1; i >= 0; i--) {
      const t = order[i];
      if (t.backfn && t.grad) t.backfn();
    }
  }
}

/** Graph-aware helper: does any input require grad (directly or upstream)? */
function tracked(...ts: Tensor[]): boolean {
  return ts.some((t) => t.requiresGrad || t.parents.length > 0);
}

function makeOutput(data: Float64Array, shape: Shape, parents: Tensor[]): Tensor {
  const out = new Tensor(data, shape, false);
  if (parents.some((p) => tracked(p))) out.parents = parents;
  return out;
}

// ---------------------------------------------------------------------------
// raw kernels
// ---------------------------------------------------------------------------

/** out[m,n] += or = a[m,k] @ b[k,n] (ikj loop order). */
export function matmulRaw(
  a: Float64Array, b: Float64Array, m: number, k: number, n: number,
  out: Float64Array, accumulate = false,
): void {
  if (!accumulate) out.fill(0, 0, m * n);
  for (let i = 0; i < m; i++) {
    const ai = i * k;
    const oi = i * n;
    for (let p = 0; p < k; p++) {
      const av = a[ai + p];
      if (av === 0) continue;
      const bp = p * n;
      for (let j = 0; j < n; j++) out[oi + j] += av * b[bp + j];
    }
  }
}

/** out[m,k] += dY[m,n] @ b[k,n]^T. */
function matmulNTAcc(
  dy: Float64Array, b: Float64Array, m: number, k: number, n: number,
  out: Float64Array,
): void {
  for (let i = 0; i < m; i++) {
    const yi = i * n;
    const oi = i * k;
    for (let p = 0; p < k; p++) {
      const bp = p * n;
      let acc = 0;
      for (let j = 0; j < n; j++) acc += dy[yi + j] * b[bp + j];
      out[oi + p] += acc;
    }
  }
}

/** out[k,n] += a[m,k]^T @ dY[m,n]. */
function matmulTNAcc(
  a: Float64Array, dy: Float64Array, m: number, k: number, n: number,
  out: Float64Array,
): void {
  for (let i = 0; i < m; i++) {
    const ai = i * k;
    const yi = i * n;
    for (let p = 0; p < k; p++) {
      const av = a[ai + p];
      if (av === 0) continue;
      const op = p * n;
      for (let j = 0; j < n; j++) out[op + j] += av * dy[yi + j];
    }
  }
}

// ---------------------------------------------------------------------------
// ops
// ---------------------------------------------------------------------------

export function matmul(a: Tensor, b: Tensor): Tensor {
  if (a.shape.length !== 2 || b.shape.length !== 2 || a.shape[1] !== b.shape[0]) {
    throw new Error(`matmul shape mismatch ${a.shape} x ${b.shape}`);
  }
  const [m, k] = a.shape;
  const n = b.shape[1];
  const data = new Float64Array(m * n);
  matmulRaw(a.data, b.data, m, k, n, data);
  const out = makeOutput(data, [m, n], [a, b]);
  if (out.parents.length) {
    out.backfn = () => {
      const g = out.grad!;
      if (tracked(a)) matmulNTAcc(g, b.data, m, k, n, a.ensureGrad());
      if (tracked(b)) matmulTNAcc(a.data, g, m, k, n, b.ensureGrad());
    };
  }
  return out;
}

export function add(a: Tensor, b: Tensor): Tensor {
  if (a.size !== b.size) throw new Error("add: size mismatch");
  const data = new Float64Array(a.size);
  for (let i = 0; i < a.size; i++) data[i] = a.data[i] + b.data[i];
  const out = makeOutput(data, a.shape, [a, b]);
  if (out.parents.length) {
    out.backfn = () => {
      const g = out.grad!;
      if (tracked(a)) {
        const ga = a.ensureGrad();
        for (let i = 0; i < g.length; i++) ga[i] += g[i];
      }
      if (tracked(b)) {
        const gb = b.ensureGrad();
        for (let i = 0; i < g.length; i++) gb[i] += g[i];
      }
    };
  }
  return out;
}

/** rows [m,n] + vector [n], broadcast over rows. */
export function addRowVector(a: Tensor, v: Tensor): Tensor {
  const [m, n] = a.shape;
  if (v.size !== n) throw new Error("addRowVector: width mismatch");
  const data = new Float64Array(a.size);
  for (let i = 0; i < m; i++) {
    const ai = i * n;
    for (let j = 0; j < n; j++) data[ai + j] = a.data[ai + j] + v.data[j];
  }
  const out = makeOutput(data, a.shape, [a, v]);
  if (out.parents.length) {
    out.backfn = () => {
      const g = out.grad!;
      if (tracked(a)) {
        const ga = a.ensureGrad();
        for (let i = 0; i < g.length; i++) ga[i] += g[i];
      }
      if (tracked(v)) {
        const gv = v.ensureGrad();
        for (let i = 0; i < m; i++) {
          const gi = i * n;
          for (let j = 0; j < n; j++) gv[j] += g[gi + j];
        }
      }
    };
  }
  return out;
}

export function scale(a: Tensor, s: number): Tensor {
  const data = new Float64Array(a.size);
  for (let i = 0; i < a.size; i++) data[i] = a.data[i] * s;
  const out = makeOutput(data, a.shape, [a]);
  if (out.parents.length) {
    out.backfn = () => {
      const g = out.grad!;
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i] * s;
    };
  }
  return out;
}

export function leakyRelu(a: Tensor, slope = 0.2): Tensor {
  const data = new Float64Array(a.size);
  for (let i = 0; i < a.size; i++) {
    const v = a.data[i];
    data[i] = v > 0 ? v : slope * v;
  }
  const out = makeOutput(data, a.shape, [a]);
  if (out.parents.length) {
    out.backfn = () => {
      const g = out.grad!;
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i] * (a.data[i] > 0 ? 1 : slope);
    };
  }
  return out;
}

export function relu(a: Tensor): Tensor {
  return leakyRelu(a, 0);
}

export function sigmoid(a: Tensor): Tensor {
  const data = new Float64Array(a.size);
  for (let i = 0; i < a.size; i++) data[i] = 1 / (1 + Math.exp(-a.data[i]));
  const out = makeOutput(data, a.shape, [a]);
  if (out.parents.length) {
    out.backfn = () => {
      const g = out.grad!;
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) {
        const s = data[i];
        ga[i] += g[i] * s * (1 - s);
      }
    };
  }
  return out;
}

/** Row-wise softmax on [m,n]. */
export function softmaxRows(a: Tensor): Tensor {
  const [m, n] = a.shape;
  const data = new Float64Array(a.size);
  for (let i = 0; i < m; i++) {
    const ai = i * n;
    let peak = -Infinity;
    for (let j = 0; j < n; j++) peak = Math.max(peak, a.data[ai + j]);
    let sum = 0;
    for (let j = 0; j < n; j++) {
      const e = Math.exp(a.data[ai + j] - peak);
      data[ai + j] = e;
      sum += e;
    }
    for (let j = 0; j < n; j++) data[ai + j] /= sum;
  }
  const out = makeOutput(data, a.shape, [a]);
  if (out.parents.length) {
    out.backfn = () => {
      const g = out.grad!;
      const ga = a.ensureGrad();
      for (let i = 0; i < m; i++) {
        const ai = i * n;
        let dot = 0;
        for (let j = 0; j < n; j++) dot += g[ai + j] * data[ai + j];
        for (let j = 0; j < n; j++) {
          ga[ai + j] += data[ai + j] * (g[ai + j] - dot);
        }
      }
    };
  }
  return out;
}

export function reshape(a: Tensor, shape: Shape): Tensor {
  if (numel(shape) !== a.size) throw new Error("reshape: element count mismatch");
  const out = makeOutput(a.data.slice(), shape, [a]);
  if (out.parents.length) {
    out.backfn = () => {
      const g = out.grad!;
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i];
    };
  }
  return out;
}

/** Stack k same-shape tensors as rows of a [k, size] matrix. */
export function stackRows(parts: Tensor[]): Tensor {
  const width = parts[0].size;
  const data = new Float64Array(parts.length * width);
  parts.forEach((p, i) => {
    if (p.size !== width) throw new Error("stackRows: ragged parts");
    data.set(p.data, i * width);
  });
  const out = makeOutput(data, [parts.length, width], [...parts]);
  if (out.parents.length) {
    out.backfn = () => {
      const g = out.grad!;
      parts.forEach((p, i) => {
        if (!tracked(p)) return;
        const gp = p.ensureGrad();
        const base = i * width;
        for (let j = 0; j < width; j++) gp[j] += g[base + j];
      });
    };
  }
  return out;
}

/** Concatenate along the channel axis of [b, c, h, w] maps. */
export function concatChannels(a: Tensor, b: Tensor): Tensor {
  const [ba, ca, h, w] = a.shape;
  const [bb, cb, hb, wb] = b.shape;
  if (ba !== bb || h !== hb || w !== wb) throw new Error("concatChannels: mismatch");
  const plane = h * w;
  const data = new Float64Array(ba * (ca + cb) * plane);
  for (let s = 0; s < ba; s++) {
    data.set(
      a.data.subarray(s * ca * plane, (s + 1) * ca * plane),
      s * (ca + cb) * plane,
    );
    data.set(
      b.data.subarray(s * cb * plane, (s + 1) * cb * plane),
      s * (ca + cb) * plane + ca * plane,
    );
  }
  const out = makeOutput(data, [ba, ca + cb, h, w], [a, b]);
  if (out.parents.length) {
    out.backfn = () => {
      const g = out.grad!;
      for (let s = 0; s < ba; s++) {
        const base = s * (ca + cb) * plane;
        if (tracked(a)) {
          const ga = a.ensureGrad();
          const off = s * ca * plane;
          for (let i = 0; i < ca * plane; i++) ga[off + i] += g[base + i];
        }
        if (tracked(b)) {
          const gb = b.ensureGrad();
          const off = s * cb * plane;
          for (let i = 0; i < cb * plane; i++) gb[off + i] += g[base + ca * plane + i];
        }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// convolution / pooling / upsampling on [b, c, h, w]
// ---------------------------------------------------------------------------

function im2colForward(
  x: Float64Array, b: number, c: number, h: number, w: number, k: number,
): Float64Array {
  // zero-padded same convolution patches: [b*h*w, c*k*k]
  const pad = (k - 1) >> 1;
  const cols = new Float64Array(b * h * w * c * k * k);
  const width = c * k * k;
  for (let s = 0; s < b; s++) {
    for (let y = 0; y < h; y++) {
      for (let x0 = 0; x0 < w; x0++) {
        const row = ((s * h + y) * w + x0) * width;
        let col = 0;
        for (let ch = 0; ch < c; ch++) {
          const chBase = (s * c + ch) * h * w;
          for (let dy = -pad; dy <= pad; dy++) {
            const yy = y + dy;
            for (let dx = -pad; dx <= pad; dx++) {
              const xx = x0 + dx;
              cols[row + col++] =
                yy >= 0 && yy < h && xx >= 0 && xx < w ? x[chBase + yy * w + xx] : 0;
            }
          }
        }
      }
    }
  }
  return cols;
}

function col2imAccumulate(
  gCols: Float64Array, gx: Float64Array,
  b: number, c: number, h: number, w: number, k: number,
): void {
  const pad = (k - 1) >> 1;
  const width = c * k * k;
  for (let s = 0; s < b; s++) {
    for (let y = 0; y < h; y++) {
      for (let x0 = 0; x0 < w; x0++) {
        const row = ((s * h + y) * w + x0) * width;
        let col = 0;
        for (let ch = 0; ch < c; ch++) {
          const chBase = (s * c + ch) * h * w;
          for (let dy = -pad; dy <= pad; dy++) {
            const yy = y + dy;
            for (let dx = -pad; dx <= pad; dx++) {
              const xx = x0 + dx;
              if (yy >= 0 && yy < h && xx >= 0 && xx < w) {
                gx[chBase + yy * w + xx] += gCols[row + col];
              }
              col++;
            }
          }
        }
      }
    }
  }
}

/** transpose [rows, cout] patch products into [b, cout, h, w] maps */
function rowsToMaps(
  rows: Float64Array, b: number, cout: number, h: number, w: number,
): Float64Array {
  const out = new Float64Array(b * cout * h * w);
  const plane = h * w;
  for (let s = 0; s < b; s++) {
    for (let p = 0; p < plane; p++) {
      const r = (s * plane + p) * cout;
      for (let ch = 0; ch < cout; ch++) out[(s * cout + ch) * plane + p] = rows[r + ch];
    }
  }
  return out;
}

function mapsToRows(
  maps: Float64Array, b: number, cout: number, h: number, w: number,
): Float64Array {
  const out = new Float64Array(b * h * w * cout);
  const plane = h * w;
  for (let s = 0; s < b; s++) {
    for (let p = 0; p < plane; p++) {
      const r = (s * plane + p) * cout;
      for (let ch = 0; ch < cout; ch++) out[r + ch] = maps[(s * cout + ch) * plane + p];
    }
  }
  return out;
}

/**
 * Same-padding convolution on [b, cin, h, w] with weight [cin*k*k, cout]
 * and bias [cout]; returns [b, cout, h, w].
 */
export function conv2d(x: Tensor, weight: Tensor, bias: Tensor, k: number): Tensor {
  const [b, cin, h, w] = x.shape;
  const cout = weight.shape[1];
  if (weight.shape[0] !== cin * k * k) {
    throw new Error(`conv2d: weight rows ${weight.shape[0]} != ${cin * k * k}`);
  }
  const cols = im2colForward(x.data, b, cin, h, w, k);
  const rows = b * h * w;
  const width = cin * k * k;
  const prod = new Float64Array(rows * cout);
  matmulRaw(cols, weight.data, rows, width, cout, prod);
  for (let r = 0; r < rows; r++) {
    const base = r * cout;
    for (let ch = 0; ch < cout; ch++) prod[base + ch] += bias.data[ch];
  }
  const out = makeOutput(rowsToMaps(prod, b, cout, h, w), [b, cout, h, w], [x, weight, bias]);
  if (out.parents.length) {
    out.backfn = () => {
      const gRows = mapsToRows(out.grad!, b, cout, h, w);
      if (tracked(bias)) {
        const gb = bias.ensureGrad();
        for (let r = 0; r < rows; r++) {
          const base = r * cout;
          for (let ch = 0; ch < cout; ch++) gb[ch] += gRows[base + ch];
        }
      }
      if (tracked(weight)) matmulTNAcc(cols, gRows, rows, width, cout, weight.ensureGrad());
      if (tracked(x)) {
        const gCols = new Float64Array(cols.length);
        matmulNTAcc(gRows, weight.data, rows, width, cout, gCols);
        col2imAccumulate(gCols, x.ensureGrad(), b, cin, h, w, k);
      }
    };
  }
  return out;
}

/** 2x2 max pooling (even h, w required). */
export function maxPool2(x: Tensor): Tensor {
  const [b, c, h, w] = x.shape;
  if (h % 2 || w % 2) throw new Error("maxPool2 needs even spatial dims");
  const oh = h / 2;
  const ow = w / 2;
  const data = new Float64Array(b * c * oh * ow);
  const argmax = new Int32Array(data.length);
  for (let s = 0; s < b * c; s++) {
    const inBase = s * h * w;
    const outBase = s * oh * ow;
    for (let y = 0; y < oh; y++) {
      for (let x0 = 0; x0 < ow; x0++) {
        let best = -Infinity;
        let bestIdx = -1;
        for (let dy = 0; dy < 2; dy++) {
          for (let dx = 0; dx < 2; dx++) {
            const idx = inBase + (2 * y + dy) * w + 2 * x0 + dx;
            if (x.data[idx] > best) {
              best = x.data[idx];
              bestIdx = idx;
            }
          }
        }
        data[outBase + y * ow + x0] = best;
        argmax[outBase + y * ow + x0] = bestIdx;
      }
    }
  }
  const out = makeOutput(data, [b, c, oh, ow], [x]);
  if (out.parents.length) {
    out.backfn = () => {
      const g = out.grad!;
      const gx = x.ensureGrad();
      for (let i = 0; i < g.length; i++) gx[argmax[i]] += g[i];
    };
  }
  return out;
}

/** 2x nearest-neighbour upsampling. */
export function upsample2(x: Tensor): Tensor {
  const [b, c, h, w] = x.shape;
  const oh = 2 * h;
  const ow = 2 * w;
  const data = new Float64Array(b * c * oh * ow);
  for (let s = 0; s < b * c; s++) {
    const inBase = s * h * w;
    const outBase = s * oh * ow;
    for (let y = 0; y < oh; y++) {
      const sy = y >> 1;
      for (let x0 = 0; x0 < ow; x0++) {
        data[outBase + y * ow + x0] = x.data[inBase + sy * w + (x0 >> 1)];
      }
    }
  }
  const out = makeOutput(data, [b, c, oh, ow], [x]);
  if (out.parents.length) {
    out.backfn = () => {
      const g = out.grad!;
      const gx = x.ensureGrad();
      for (let s = 0; s < b * c; s++) {
        const inBase = s * h * w;
        const outBase = s * oh * ow;
        for (let y = 0; y < oh; y++) {
          const sy = y >> 1;
          for (let x0 = 0; x0 < ow; x0++) {
            gx[inBase + sy * w + (x0 >> 1)] += g[outBase + y * ow + x0];
          }
        }
      }
    };
  }
  return out;
}
