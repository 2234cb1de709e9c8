/**
 * Reconstruction architectures.
 *
 * gat_res_unet: three graph-attention layers over the receiver graph
 * (complete, self-loops included, scalar edge feature = pairwise receiver
 * distance normalized by the domain side), flattened and linearly projected
 * to image space with a sigmoid, then five single-channel pre-activation
 * residual conv blocks and a three-level UNet (16/32/64 channels) with a
 * final sigmoid.
 *
 * Baselines consume only the received vector through a linear projection:
 * unet (projection -> UNet) and resnet_unet (projection -> ResNet -> UNet).
 */

import {
  Tensor,
  add,
  addRowVector,
  concatChannels,
  conv2d,
  leakyRelu,
  matmul,
  maxPool2,
  relu,
  reshape,
  sigmoid,
  softmaxRows,
  stackRows,
  upsample2,
} from "./tensor.js";
import { Rng } from "./rng.js";

export type Architecture = "unet" | "resnet_unet" | "gat_res_unet";

export interface ModelConfig {
  architecture: Architecture;
  nReceivers: number;
  height: number;
  width: number;
  gatLayers: number;   // attention layers in sequence
  gatDim: number;      // embedding dimension
  resBlocks: number;   // single-channel residual blocks
  unetChannels: [number, number, number];
  leakySlope: number;
  seed: number;
}

export const GAT_FEATURES = 4; // [Re e, Im e, Re e_inc, Im e_inc] per receiver

export function defaultConfig(partial: Partial<ModelConfig> & Pick<ModelConfig, "architecture" | "nReceivers" | "height" | "width">): ModelConfig {
  return {
    gatLayers: 3,
    gatDim: 32,
    resBlocks: 5,
    unetChannels: [16, 32, 64],
    leakySlope: 0.2,
    seed: 0,
    ...partial,
  };
}

export interface NamedParam {
  name: string;
  tensor: Tensor;
}

/** One record's network inputs. */
export interface SampleInput {
  /** [nReceivers, 4] node features (gat_res_unet) */
  nodeFeatures: Float64Array;
  /** [2 * nReceivers] interleaved re/im of e (baselines) */
  receivedVector: Float64Array;
}

function glorot(rng: Rng, fanIn: number, fanOut: number, n: number): Float64Array {
  const limit = Math.sqrt(6 / (fanIn + fanOut));
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) out[i] = (2 * rng.next() - 1) * limit;
  return out;
}

class ParamStore {
  readonly params: NamedParam[] = [];
  constructor(private rng: Rng) {}

  matrix(name: string, rows: number, cols: number): Tensor {
    const t = new Tensor(glorot(this.rng, rows, cols, rows * cols), [rows, cols], true);
    this.params.push({ name, tensor: t });
    return t;
  }

  vector(name: string, n: number, fan = n): Tensor {
    const t = new Tensor(glorot(this.rng, fan, 1, n), [n], true);
    this.params.push({ name, tensor: t });
    return t;
  }

  zerosVector(name: string, n: number): Tensor {
    const t = Tensor.zeros([n], true);
    this.params.push({ name, tensor: t });
    return t;
  }

  conv(name: string, cin: number, cout: number, k: number): { w: Tensor; b: Tensor } {
    const w = new Tensor(
      glorot(this.rng, cin * k * k, cout, cin * k * k * cout),
      [cin * k * k, cout],
      true,
    );
    this.params.push({ name: `${name}.w`, tensor: w });
    const b = Tensor.zeros([cout], true);
    this.params.push({ name: `${name}.b`, tensor: b });
    return { w, b };
  }
}

export interface GatLayerParams {
  thetaS: Tensor; // [f, d]
  thetaT: Tensor; // [f, d]
  wS: Tensor;     // [d, 1]
  wT: Tensor;     // [d, 1]
  /** collapsed scalar path for the edge feature: (wE . thetaE) */
  wE: Tensor;     // [d, 1]
  thetaE: Tensor; // [1, d]
}

/**
 * Attention layer over the complete receiver graph.
 *
 * logits[i][j] = LeakyReLU(wS.(thetaS x_i) + wT.(thetaT x_j) + wE.(thetaE d_ij))
 * A = row softmax; out_i = sum_j A[i][j] * (thetaT x_j).
 */
export function gatLayer(
  x: Tensor,            // [n, f]
  edgeDist: Tensor,     // [n, n] constant
  p: GatLayerParams,
  slope: number,
): Tensor {
  const { attention, targetEmbed } = gatAttention(x, edgeDist, p, slope);
  return matmul(attention, targetEmbed);         // [n, d]
}

/** Attention matrix and target embeddings of one layer (exposed for tests). */
export function gatAttention(
  x: Tensor,
  edgeDist: Tensor,
  p: GatLayerParams,
  slope: number,
): { attention: Tensor; targetEmbed: Tensor } {
  const n = x.shape[0];
  const s = matmul(matmul(x, p.thetaS), p.wS);   // [n, 1]
  const targetEmbed = matmul(x, p.thetaT);       // [n, d]
  const tScore = matmul(targetEmbed, p.wT);      // [n, 1]
  const edgeScalar = matmul(p.thetaE, p.wE);     // [1, 1]
  const logits = gatLogits(s, tScore, edgeScalar, edgeDist, n);
  const attention = softmaxRows(leakyRelu(logits, slope));
  return { attention, targetEmbed };
}

/** logits[i][j] = s[i] + t[j] + c * dist[i][j] (fused op with backward). */
function gatLogits(s: Tensor, t: Tensor, c: Tensor, dist: Tensor, n: number): Tensor {
  const data = new Float64Array(n * n);
  const cv = c.data[0];
  for (let i = 0; i < n; i++) {
    const si = s.data[i];
    for (let j = 0; j < n; j++) {
      data[i * n + j] = si + t.data[j] + cv * dist.data[i * n + j];
    }
  }
  const out = new Tensor(data, [n, n]);
  out.parents = [s, t, c];
  out.backfn = () => {
    const g = out.grad!;
    const gs = s.ensureGrad();
    const gt = t.ensureGrad();
    const gc = c.ensureGrad();
    let cAcc = 0;
    for (let i = 0; i < n; i++) {
      let rowAcc = 0;
      for (let j = 0; j < n; j++) {
        const gij = g[i * n + j];
        rowAcc += gij;
        gt[j] += gij;
        cAcc += gij * dist.data[i * n + j];
      }
      gs[i] += rowAcc;
    }
    gc[0] += cAcc;
  };
  return out;
}

/** Pre-activation residual block, single channel, two 3x3 convolutions. */
function resBlock(
  x: Tensor,
  conv1: { w: Tensor; b: Tensor },
  conv2: { w: Tensor; b: Tensor },
): Tensor {
  const inner = conv2d(relu(x), conv1.w, conv1.b, 3);
  const update = conv2d(relu(inner), conv2.w, conv2.b, 3);
  return add(x, update);
}

export class ReconstructionModel {
  readonly config: ModelConfig;
  readonly store: ParamStore;
  private gat: GatLayerParams[] = [];
  private projW!: Tensor;
  private projB!: Tensor;
  private res: Array<[{ w: Tensor; b: Tensor }, { w: Tensor; b: Tensor }]> = [];
  private enc1a!: { w: Tensor; b: Tensor };
  private enc1b!: { w: Tensor; b: Tensor };
  private enc2a!: { w: Tensor; b: Tensor };
  private enc2b!: { w: Tensor; b: Tensor };
  private bota!: { w: Tensor; b: Tensor };
  private botb!: { w: Tensor; b: Tensor };
  private dec2a!: { w: Tensor; b: Tensor };
  private dec2b!: { w: Tensor; b: Tensor };
  private dec1a!: { w: Tensor; b: Tensor };
  private dec1b!: { w: Tensor; b: Tensor };
  private head!: { w: Tensor; b: Tensor };
  /** fixed edge-distance matrix, normalized; set from the dataset */
  edgeDist: Tensor | null = null;

  constructor(config: ModelConfig) {
    this.config = config;
    this.store = new ParamStore(new Rng(hashConfig(config)));
    const { architecture, nReceivers, gatLayers, gatDim, height, width } = config;

    if (architecture === "gat_res_unet") {
      let fan = GAT_FEATURES;
      for (let l = 0; l < gatLayers; l++) {
        this.gat.push({
          thetaS: this.store.matrix(`gat${l}.thetaS`, fan, gatDim),
          thetaT: this.store.matrix(`gat${l}.thetaT`, fan, gatDim),
          wS: this.store.matrix(`gat${l}.wS`, gatDim, 1),
          wT: this.store.matrix(`gat${l}.wT`, gatDim, 1),
          wE: this.store.matrix(`gat${l}.wE`, gatDim, 1),
          thetaE: this.store.matrix(`gat${l}.thetaE`, 1, gatDim),
        });
        fan = gatDim;
      }
      this.projW = this.store.matrix("proj.w", gatDim * nReceivers, height * width);
    } else {
      this.projW = this.store.matrix("proj.w", 2 * nReceivers, height * width);
    }
    this.projB = this.store.zerosVector("proj.b", height * width);

    if (architecture !== "unet") {
      for (let r = 0; r < config.resBlocks; r++) {
        this.res.push([
          this.store.conv(`res${r}.conv1`, 1, 1, 3),
          this.store.conv(`res${r}.conv2`, 1, 1, 3),
        ]);
      }
    }

    const [c1, c2, c3] = config.unetChannels;
    this.enc1a = this.store.conv("unet.enc1a", 1, c1, 3);
    this.enc1b = this.store.conv("unet.enc1b", c1, c1, 3);
    this.enc2a = this.store.conv("unet.enc2a", c1, c2, 3);
    this.enc2b = this.store.conv("unet.enc2b", c2, c2, 3);
    this.bota = this.store.conv("unet.bota", c2, c3, 3);
    this.botb = this.store.conv("unet.botb", c3, c3, 3);
    this.dec2a = this.store.conv("unet.dec2a", c3 + c2, c2, 3);
    this.dec2b = this.store.conv("unet.dec2b", c2, c2, 3);
    this.dec1a = this.store.conv("unet.dec1a", c2 + c1, c1, 3);
    this.dec1b = this.store.conv("unet.dec1b", c1, c1, 3);
    this.head = this.store.conv("unet.head", c1, 1, 1);
  }

  parameters(): NamedParam[] {
    return this.store.params;
  }

  /** [b, 1, h, w] -> [b, 1, h, w] */
  private unet(x: Tensor): Tensor {
    const e1 = relu(conv2d(relu(conv2d(x, this.enc1a.w, this.enc1a.b, 3)), this.enc1b.w, this.enc1b.b, 3));
    const e2 = relu(conv2d(relu(conv2d(maxPool2(e1), this.enc2a.w, this.enc2a.b, 3)), this.enc2b.w, this.enc2b.b, 3));
    const bottleneck = relu(conv2d(relu(conv2d(maxPool2(e2), this.bota.w, this.bota.b, 3)), this.botb.w, this.botb.b, 3));
    const d2In = concatChannels(upsample2(bottleneck), e2);
    const d2 = relu(conv2d(relu(conv2d(d2In, this.dec2a.w, this.dec2a.b, 3)), this.dec2b.w, this.dec2b.b, 3));
    const d1In = concatChannels(upsample2(d2), e1);
    const d1 = relu(conv2d(relu(conv2d(d1In, this.dec1a.w, this.dec1a.b, 3)), this.dec1b.w, this.dec1b.b, 3));
    return conv2d(d1, this.head.w, this.head.b, 1);
  }

  /** Forward a batch of samples to predicted images, [batch, h*w] in (0,1). */
  forward(batch: SampleInput[]): Tensor {
    const { architecture, nReceivers, height, width, leakySlope } = this.config;
    let projected: Tensor;
    if (architecture === "gat_res_unet") {
      if (!this.edgeDist) throw new Error("edgeDist matrix not set");
      const flats: Tensor[] = [];
      for (const sample of batch) {
        let x = new Tensor(sample.nodeFeatures, [nReceivers, GAT_FEATURES]);
        for (const layer of this.gat) {
          x = gatLayer(x, this.edgeDist, layer, leakySlope);
        }
        flats.push(reshape(x, [this.config.gatDim * nReceivers]));
      }
      const z = stackRows(flats);
      projected = sigmoid(addRowVector(matmul(z, this.projW), this.projB));
    } else {
      const z = stackRows(
        batch.map((s) => new Tensor(s.receivedVector, [2 * nReceivers])),
      );
      projected = sigmoid(addRowVector(matmul(z, this.projW), this.projB));
    }
    let image = reshape(projected, [batch.length, 1, height, width]);
    for (const [c1, c2] of this.res) {
      image = resBlock(image, c1, c2);
    }
    const decoded = this.unet(image);
    return reshape(sigmoid(decoded), [batch.length, height * width]);
  }
}

function hashConfig(config: ModelConfig): number {
  // stable init seed derived from the run seed and architecture
  const archCode = { unet: 1, resnet_unet: 2, gat_res_unet: 3 }[config.architecture];
  return ((config.seed * 2654435761) ^ (archCode * 40503)) >>> 0;
}

// ---------------------------------------------------------------------------
// checkpoint serialization
// ---------------------------------------------------------------------------
export interface Checkpoint {
  config: ModelConfig;
  /** dataset-level input scale divisor applied to features */
  inputScale: number;
  params: Record<string, string>; // base64 LE float64
}

export function saveParams(model: ReconstructionModel, inputScale: number): Checkpoint {
  const params: Record<string, string> = {};
  for (const { name, tensor } of model.parameters()) {
    params[name] = Buffer.from(
      tensor.data.buffer, tensor.data.byteOffset, tensor.data.byteLength,
    ).toString("base64");
  }
  return { config: model.config, inputScale, params };
}

export function loadParams(checkpoint: Checkpoint): ReconstructionModel {
  const model = new ReconstructionModel(checkpoint.config);
  for (const { name, tensor } of model.parameters()) {
    const blob = checkpoint.params[name];
    if (!blob) throw new Error(`checkpoint missing parameter ${name}`);
    const bytes = Uint8Array.from(Buffer.from(blob, "base64")); // force 8-aligned copy
    const values = new Float64Array(bytes.buffer, 0, bytes.byteLength / 8);
    if (values.length !== tensor.size) {
      throw new Error(`checkpoint parameter ${name} has wrong size`);
    }
    tensor.data.set(values);
  }
  return model;
}
