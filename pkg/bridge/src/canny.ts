/**
 * Canny edges for the inversion stage: blur, Sobel, non-maximum
 * suppression, double threshold, hysteresis.  Same conventions as the
 * toolkit's detector (reflect padding, raw Sobel magnitudes, plateau
 * ties keep the first pixel, 1-px border suppressed).
 */

import { Image, toGray } from "./png.js";

export function canny(
  image: Image,
  low = 100,
  high = 200,
  sigma = 1.4,
  kernelSize = 5,
): Image {
  if (low >= high) throw new Error(`thresholds out of order: low ${low} >= high ${high}`);
  const { width: w, height: h } = image;
  const gray = toGray(image);

  // Gaussian blur, reflect padding
  const half = kernelSize >> 1;
  const g1 = new Float64Array(kernelSize);
  for (let i = 0; i < kernelSize; i++) g1[i] = Math.exp(-((i - half) ** 2) / (2 * sigma * sigma));
  const gsum = g1.reduce((a, b) => a + b, 0);
  for (let i = 0; i < kernelSize; i++) g1[i] /= gsum;
  const reflect = (v: number, n: number) => {
    while (v < 0 || v >= n) v = v < 0 ? -v - 1 : 2 * n - v - 1;
    return v;
  };
  const tmp = new Float64Array(w * h);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      let acc = 0;
      for (let k = -half; k <= half; k++) acc += g1[k + half] * gray[y * w + reflect(x + k, w)];
      tmp[y * w + x] = acc;
    }
  }
  const blurred = new Float64Array(w * h);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      let acc = 0;
      for (let k = -half; k <= half; k++) acc += g1[k + half] * tmp[reflect(y + k, h) * w + x];
      blurred[y * w + x] = acc;
    }
  }

  // Sobel
  const gx = new Float64Array(w * h);
  const gy = new Float64Array(w * h);
  const mag = new Float64Array(w * h);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      let sx = 0;
      let sy = 0;
      for (let dy = -1; dy <= 1; dy++) {
        for (let dx = -1; dx <= 1; dx++) {
          const v = blurred[reflect(y + dy, h) * w + reflect(x + dx, w)];
          const kx = dx * (dy === 0 ? 2 : 1);
          const ky = dy * (dx === 0 ? 2 : 1);
          sx += kx * v;
          sy += ky * v;
        }
      }
      gx[y * w + x] = sx;
      gy[y * w + x] = sy;
      mag[y * w + x] = Math.hypot(sx, sy);
    }
  }

  // non-maximum suppression with 4-bin direction quantization
  const keep = new Uint8Array(w * h);
  for (let y = 1; y < h - 1; y++) {
    for (let x = 1; x < w - 1; x++) {
      const i = y * w + x;
      let angle = (Math.atan2(gy[i], gx[i]) * 180) / Math.PI;
      angle = ((angle % 180) + 180) % 180;
      let dr = 0;
      let dc = 1;
      if (angle >= 22.5 && angle < 67.5) {
        dr = 1; dc = 1;
      } else if (angle >= 67.5 && angle < 112.5) {
        dr = 1; dc = 0;
      } else if (angle >= 112.5 && angle < 157.5) {
        dr = 1; dc = -1;
      }
      const fwd = mag[(y + dr) * w + (x + dc)];
      const bwd = mag[(y - dr) * w + (x - dc)];
      if (mag[i] > bwd && mag[i] >= fwd) keep[i] = 1;
    }
  }

  // double threshold + hysteresis (8-connected flood from strong pixels)
  const state = new Uint8Array(w * h); // 0 none, 1 weak, 2 strong
  const stack: number[] = [];
  for (let i = 0; i < w * h; i++) {
    if (!keep[i]) continue;
    if (mag[i] >= high) {
      state[i] = 2;
      stack.push(i);
    } else if (mag[i] >= low) {
      state[i] = 1;
    }
  }
  const edges = new Uint8Array(w * h);
  while (stack.length) {
    const i = stack.pop()!;
    if (edges[i]) continue;
    edges[i] = 255;
    const y = Math.floor(i / w);
    const x = i - y * w;
    for (let dy = -1; dy <= 1; dy++) {
      for (let dx = -1; dx <= 1; dx++) {
        const ny = y + dy;
        const nx = x + dx;
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        const j = ny * w + nx;
        if (!edges[j] && state[j] >= 1) stack.push(j);
      }
    }
  }
  return { width: w, height: h, channels: 1, data: edges };
}
