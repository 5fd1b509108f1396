/**
 * The synthetic diffusion backend.
 *
 * No pretrained weights ship with this package, so the denoiser, its
 * activation capture points, and the latent codec are small
 * deterministic functions with weights derived from the model
 * identifier.  The guided-inference machinery around them (DDIM
 * schedule, inversion, null-embedding optimization, activation-matched
 * latent updates) is the real algorithm and treats this backend exactly
 * like a heavyweight one: everything flows through `epsilon`,
 * `activations`, `encode` and `decode`.
 */

import { Tensor, downsample, gaussians, rngFromString, tensorFrom, upsample, zeros } from "./tensor.js";
import { Image } from "./png.js";

export const LATENT_CHANNELS = 4;
export const LATENT_SIZE = 64;
export const IMAGE_SIZE = 512;
export const EMBED_DIM = 8;

/** capture points: decoder-side grids at three resolutions */
export const CAPTURE_POINTS = [
  { name: "decoder.res64", channels: 320, size: 64 },
  { name: "decoder.res32", channels: 640, size: 32 },
  { name: "decoder.res16", channels: 1280, size: 16 },
] as const;

export interface DdimSchedule {
  /** cumulative alpha-bar per inference step, t = totalSteps-1 (noisiest) .. 0 */
  alphaBar: Float64Array;
}

export function makeSchedule(totalSteps: number): DdimSchedule {
  // linear-in-sqrt beta schedule over 1000 training steps, subsampled
  const train = 1000;
  const betaStart = Math.sqrt(0.00085);
  const betaEnd = Math.sqrt(0.012);
  const alphaBarTrain = new Float64Array(train);
  let acc = 1.0;
  for (let i = 0; i < train; i++) {
    const beta = (betaStart + ((betaEnd - betaStart) * i) / (train - 1)) ** 2;
    acc *= 1 - beta;
    alphaBarTrain[i] = acc;
  }
  const alphaBar = new Float64Array(totalSteps);
  for (let s = 0; s < totalSteps; s++) {
    const t = Math.floor(((s + 1) * train) / totalSteps) - 1;
    alphaBar[s] = alphaBarTrain[t];
  }
  return { alphaBar };
}

export class SyntheticModel {
  readonly baseModel: string;
  readonly controlModel: string;
  private channelMix: Float32Array; // 4x4
  private timeGain: Float32Array; // per-channel
  private nullBias: Float32Array; // 4 x EMBED_DIM
  private promptBias: Float32Array; // 4 x EMBED_DIM
  private controlGain: Float32Array; // per-channel
  private projections: Map<string, Float32Array>; // capture name -> C x 4

  constructor(baseModel: string, controlModel: string) {
    this.baseModel = baseModel;
    this.controlModel = controlModel;
    const rng = rngFromString(`unet:${baseModel}`);
    this.channelMix = Float32Array.from(gaussians(rng, 16), (v) => 0.25 * v);
    this.timeGain = Float32Array.from(gaussians(rng, LATENT_CHANNELS), (v) => 0.1 * v);
    this.nullBias = Float32Array.from(gaussians(rng, LATENT_CHANNELS * EMBED_DIM), (v) => 0.2 * v);
    this.promptBias = Float32Array.from(gaussians(rng, LATENT_CHANNELS * EMBED_DIM), (v) => 0.2 * v);
    const controlRng = rngFromString(`control:${controlModel}`);
    this.controlGain = Float32Array.from(gaussians(controlRng, LATENT_CHANNELS), (v) => 0.3 * v);
    this.projections = new Map();
    for (const point of CAPTURE_POINTS) {
      const prng = rngFromString(`proj:${baseModel}:${point.name}`);
      const scale = 1 / Math.sqrt(LATENT_CHANNELS);
      this.projections.set(
        point.name,
        Float32Array.from(gaussians(prng, point.channels * LATENT_CHANNELS), (v) => scale * v),
      );
    }
  }

  /** noise prediction; linear in the latent and in both embeddings */
  epsilon(
    z: Tensor,
    step: number,
    totalSteps: number,
    nullEmbed: Float32Array,
    promptEmbed: Float32Array,
    control: Tensor | null,
  ): Tensor {
    const [c, h, w] = z.shape;
    const out = zeros([c, h, w]);
    const tFrac = totalSteps > 1 ? step / (totalSteps - 1) : 0;
    const bias = new Float32Array(c);
    for (let ch = 0; ch < c; ch++) {
      let nb = 0;
      let pb = 0;
      for (let k = 0; k < EMBED_DIM; k++) {
        nb += this.nullBias[ch * EMBED_DIM + k] * nullEmbed[k];
        pb += this.promptBias[ch * EMBED_DIM + k] * promptEmbed[k];
      }
      bias[ch] = nb + pb + this.timeGain[ch] * tFrac;
    }
    const plane = h * w;
    for (let ch = 0; ch < c; ch++) {
      for (let p = 0; p < plane; p++) {
        let acc = bias[ch];
        for (let k = 0; k < c; k++) {
          acc += this.channelMix[ch * c + k] * z.data[k * plane + p];
        }
        if (control) acc += this.controlGain[ch] * control.data[p];
        out.data[ch * plane + p] = acc;
      }
    }
    return out;
  }

  /** capture-point activations of a latent */
  activations(z: Tensor): { name: string; tensor: Tensor }[] {
    return CAPTURE_POINTS.map((point) => {
      const zAt = point.size === LATENT_SIZE ? z : downsample(z, point.size, point.size);
      const proj = this.projections.get(point.name)!;
      const plane = point.size * point.size;
      const out = zeros([point.channels, point.size, point.size]);
      for (let ch = 0; ch < point.channels; ch++) {
        const row = ch * LATENT_CHANNELS;
        for (let p = 0; p < plane; p++) {
          let acc = 0;
          for (let k = 0; k < LATENT_CHANNELS; k++) {
            acc += proj[row + k] * zAt.data[k * plane + p];
          }
          out.data[ch * plane + p] = acc;
        }
      }
      return { name: point.name, tensor: out };
    });
  }

  /**
   * Gradient of 0.5 * sum_l w_l * mean((act_l - target_l)^2) with respect
   * to the latent; targets indexed by capture-point name.
   */
  activationLossGradient(
    z: Tensor,
    targets: Map<string, Tensor>,
    layerWeights: Map<string, number>,
  ): { grad: Tensor; losses: Record<string, number>; total: number } {
    const grad = zeros(z.shape);
    const losses: Record<string, number> = {};
    let total = 0;
    for (const point of CAPTURE_POINTS) {
      const target = targets.get(point.name);
      if (!target) continue;
      const weight = layerWeights.get(point.name) ?? 1.0;
      const proj = this.projections.get(point.name)!;
      const plane = point.size * point.size;
      const zAt = point.size === LATENT_SIZE ? z : downsample(z, point.size, point.size);
      const gradAt = zeros([LATENT_CHANNELS, point.size, point.size]);
      const numel = point.channels * plane;
      let loss = 0;
      for (let ch = 0; ch < point.channels; ch++) {
        const row = ch * LATENT_CHANNELS;
        const base = ch * plane;
        for (let p = 0; p < plane; p++) {
          let acc = 0;
          for (let k = 0; k < LATENT_CHANNELS; k++) {
            acc += proj[row + k] * zAt.data[k * plane + p];
          }
          const r = acc - target.data[base + p];
          loss += r * r;
          const scaled = (weight * r) / numel;
          for (let k = 0; k < LATENT_CHANNELS; k++) {
            gradAt.data[k * plane + p] += proj[row + k] * scaled;
          }
        }
      }
      losses[point.name] = loss / numel;
      total += (weight * loss) / numel;
      if (point.size === LATENT_SIZE) {
        for (let i = 0; i < grad.data.length; i++) grad.data[i] += gradAt.data[i];
      } else {
        // chain rule through the area-average pooling
        const up = upsample(gradAt, LATENT_SIZE, LATENT_SIZE);
        const area = (LATENT_SIZE / point.size) ** 2;
        for (let i = 0; i < grad.data.length; i++) grad.data[i] += up.data[i] / area;
      }
    }
    return { grad, losses, total };
  }

  /**
   * Gradient of mean(residual^2) with respect to the null embedding,
   * given that epsilon is linear in it; ``scale`` carries the DDIM
   * coefficient on the noise prediction.
   */
  nullEmbedGradient(residual: Tensor, scale: number): Float32Array {
    const [c, h, w] = residual.shape;
    const plane = h * w;
    const grad = new Float32Array(EMBED_DIM);
    for (let ch = 0; ch < c; ch++) {
      let sum = 0;
      for (let p = 0; p < plane; p++) sum += residual.data[ch * plane + p];
      const factor = (2 * scale * sum) / (c * plane);
      for (let j = 0; j < EMBED_DIM; j++) {
        grad[j] += factor * this.nullBias[ch * EMBED_DIM + j];
      }
    }
    return grad;
  }

  /** latent -> RGB image, a fixed linear color projection per 8x8 block */
  decode(z: Tensor): Image {
    const rng = rngFromString(`vae:${this.baseModel}`);
    const colors = Float32Array.from(gaussians(rng, 3 * LATENT_CHANNELS), (v) => 45 * v);
    const up = upsample(z, IMAGE_SIZE, IMAGE_SIZE);
    const plane = IMAGE_SIZE * IMAGE_SIZE;
    const data = new Uint8Array(plane * 3);
    for (let p = 0; p < plane; p++) {
      for (let ch = 0; ch < 3; ch++) {
        let acc = 128;
        for (let k = 0; k < LATENT_CHANNELS; k++) {
          acc += colors[ch * LATENT_CHANNELS + k] * up.data[k * plane + p];
        }
        data[p * 3 + ch] = Math.max(0, Math.min(255, Math.round(acc)));
      }
    }
    return { width: IMAGE_SIZE, height: IMAGE_SIZE, channels: 3, data };
  }

  /** RGB image -> latent; centered channel averages per 8x8 block */
  encode(image: Image): Tensor {
    if (image.width !== IMAGE_SIZE || image.height !== IMAGE_SIZE) {
      throw new Error(`expected a ${IMAGE_SIZE}x${IMAGE_SIZE} image, got ${image.width}x${image.height}`);
    }
    const plane = IMAGE_SIZE * IMAGE_SIZE;
    const rgb = zeros([3, IMAGE_SIZE, IMAGE_SIZE]);
    for (let p = 0; p < plane; p++) {
      if (image.channels === 3) {
        rgb.data[p] = image.data[p * 3];
        rgb.data[plane + p] = image.data[p * 3 + 1];
        rgb.data[2 * plane + p] = image.data[p * 3 + 2];
      } else {
        rgb.data[p] = rgb.data[plane + p] = rgb.data[2 * plane + p] = image.data[p];
      }
    }
    const small = downsample(rgb, LATENT_SIZE, LATENT_SIZE);
    const z = zeros([LATENT_CHANNELS, LATENT_SIZE, LATENT_SIZE]);
    const sp = LATENT_SIZE * LATENT_SIZE;
    for (let p = 0; p < sp; p++) {
      const r = small.data[p] / 255 - 0.5;
      const g = small.data[sp + p] / 255 - 0.5;
      const b = small.data[2 * sp + p] / 255 - 0.5;
      z.data[p] = r + g + b;
      z.data[sp + p] = r - g;
      z.data[2 * sp + p] = g - b;
      z.data[3 * sp + p] = 0.5 * (r + b) - g;
    }
    return z;
  }
}

/** prompt text -> deterministic embedding; empty prompt is the zero vector */
export function promptEmbedding(prompt: string): Float32Array {
  if (!prompt) return new Float32Array(EMBED_DIM);
  const rng = rngFromString(`prompt:${prompt}`);
  return Float32Array.from(gaussians(rng, EMBED_DIM), (v) => 0.5 * v);
}

/** binary edge map -> latent-resolution control field in [0, 1] */
export function controlField(edges: Image): Tensor {
  const gray = edges.channels === 1 ? edges.data : null;
  const src = zeros([1, edges.height, edges.width]);
  for (let p = 0; p < edges.width * edges.height; p++) {
    const v = gray ? gray[p] : edges.data[p * 3];
    src.data[p] = v >= 128 ? 1 : 0;
  }
  if (edges.height === LATENT_SIZE && edges.width === LATENT_SIZE) return src;
  if (edges.height % LATENT_SIZE === 0 && edges.width % LATENT_SIZE === 0) {
    return downsample(src, LATENT_SIZE, LATENT_SIZE);
  }
  // non-multiple sizes: block-average with floor bounds
  const out = zeros([1, LATENT_SIZE, LATENT_SIZE]);
  for (let y = 0; y < LATENT_SIZE; y++) {
    const y0 = Math.floor((y * edges.height) / LATENT_SIZE);
    const y1 = Math.max(y0 + 1, Math.floor(((y + 1) * edges.height) / LATENT_SIZE));
    for (let x = 0; x < LATENT_SIZE; x++) {
      const x0 = Math.floor((x * edges.width) / LATENT_SIZE);
      const x1 = Math.max(x0 + 1, Math.floor(((x + 1) * edges.width) / LATENT_SIZE));
      let acc = 0;
      for (let yy = y0; yy < y1; yy++) {
        for (let xx = x0; xx < x1; xx++) acc += src.data[yy * edges.width + xx];
      }
      out.data[y * LATENT_SIZE + x] = acc / ((y1 - y0) * (x1 - x0));
    }
  }
  return out;
}

/** initial noise derived from a seed, for runs without an inversion */
export function seededNoise(seed: number): Tensor {
  const rng = rngFromString(`noise:${seed}`);
  return tensorFrom(
    [LATENT_CHANNELS, LATENT_SIZE, LATENT_SIZE],
    gaussians(rng, LATENT_CHANNELS * LATENT_SIZE * LATENT_SIZE),
  );
}
