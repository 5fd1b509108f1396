/**
 * Minimal float tensors and a deterministic PRNG.
 *
 * Everything the synthetic backend computes flows through these helpers,
 * so a fixed seed yields bit-identical runs on any platform.
 */

export interface Tensor {
  /** shape, outermost first, e.g. [C, H, W] */
  shape: number[];
  data: Float32Array;
}

export function zeros(shape: number[]): Tensor {
  const size = shape.reduce((a, b) => a * b, 1);
  return { shape: [...shape], data: new Float32Array(size) };
}

export function tensorFrom(shape: number[], data: Float32Array): Tensor {
  const size = shape.reduce((a, b) => a * b, 1);
  if (data.length !== size) {
    throw new Error(`data length ${data.length} does not match shape [${shape.join(", ")}]`);
  }
  return { shape: [...shape], data };
}

export function clone(t: Tensor): Tensor {
  return { shape: [...t.shape], data: new Float32Array(t.data) };
}

export function assertFinite(t: Tensor, name: string): void {
  for (let i = 0; i < t.data.length; i++) {
    if (!Number.isFinite(t.data[i])) {
      throw new Error(`${name} contains a non-finite value at index ${i}`);
    }
  }
}

/** sfc32: tiny, fast, reproducible; seeded from a string */
export function rngFromString(seed: string): () => number {
  let h = 2166136261 >>> 0;
  for (let i = 0; i < seed.length; i++) {
    h = Math.imul(h ^ seed.charCodeAt(i), 16777619);
  }
  let a = h >>> 0;
  let b = (h ^ 0x9e3779b9) >>> 0;
  let c = (h ^ 0x85ebca6b) >>> 0;
  let d = (h ^ 0xc2b2ae35) >>> 0;
  return function () {
    a >>>= 0; b >>>= 0; c >>>= 0; d >>>= 0;
    const t = (a + b) | 0;
    a = b ^ (b >>> 9);
    b = (c + (c << 3)) | 0;
    c = (c << 21) | (c >>> 11);
    d = (d + 1) | 0;
    const u = (t + d) | 0;
    c = (c + u) | 0;
    return (u >>> 0) / 4294967296;
  };
}

/** standard normal via Box-Muller on the seeded uniform stream */
export function gaussians(rng: () => number, count: number): Float32Array {
  const out = new Float32Array(count);
  for (let i = 0; i < count; i += 2) {
    let u = rng();
    if (u <= 1e-12) u = 1e-12;
    const v = rng();
    const r = Math.sqrt(-2 * Math.log(u));
    out[i] = r * Math.cos(2 * Math.PI * v);
    if (i + 1 < count) out[i + 1] = r * Math.sin(2 * Math.PI * v);
  }
  return out;
}

/** area-average downsample of a (C, H, W) tensor to (C, h, w); H, W multiples of h, w */
export function downsample(t: Tensor, h: number, w: number): Tensor {
  const [c, H, W] = t.shape;
  if (H % h !== 0 || W % w !== 0) {
    throw new Error(`cannot downsample ${H}x${W} to ${h}x${w} by integer blocks`);
  }
  const by = H / h;
  const bx = W / w;
  const out = zeros([c, h, w]);
  for (let ch = 0; ch < c; ch++) {
    const src = ch * H * W;
    const dst = ch * h * w;
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        let acc = 0;
        for (let dy = 0; dy < by; dy++) {
          for (let dx = 0; dx < bx; dx++) {
            acc += t.data[src + (y * by + dy) * W + (x * bx + dx)];
          }
        }
        out.data[dst + y * w + x] = acc / (by * bx);
      }
    }
  }
  return out;
}

/** nearest-neighbor upsample of (C, h, w) to (C, H, W); H, W multiples of h, w */
export function upsample(t: Tensor, H: number, W: number): Tensor {
  const [c, h, w] = t.shape;
  if (H % h !== 0 || W % w !== 0) {
    throw new Error(`cannot upsample ${h}x${w} to ${H}x${W} by integer blocks`);
  }
  const by = H / h;
  const bx = W / w;
  const out = zeros([c, H, W]);
  for (let ch = 0; ch < c; ch++) {
    const src = ch * h * w;
    const dst = ch * H * W;
    for (let y = 0; y < H; y++) {
      const sy = Math.floor(y / by);
      for (let x = 0; x < W; x++) {
        out.data[dst + y * W + x] = t.data[src + sy * w + Math.floor(x / bx)];
      }
    }
  }
  return out;
}
