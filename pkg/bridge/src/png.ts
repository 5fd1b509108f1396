/**
 * Just-enough PNG: 8-bit grayscale and RGB(A) decode, gray/RGB encode.
 *
 * Decoding handles all five scanline filters so images written by other
 * tools (the prodg toolkit uses Pillow) load correctly; encoding always
 * uses filter 0 with a fixed zlib level, so output bytes are stable.
 */

import { deflateSync, inflateSync } from "node:zlib";
import { readFileSync, writeFileSync } from "node:fs";

export interface Image {
  width: number;
  height: number;
  channels: 1 | 3;
  /** row-major, channels interleaved */
  data: Uint8Array;
}

const SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Buffer): number {
  let c = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, body: Buffer): Buffer {
  const head = Buffer.alloc(8);
  head.writeUInt32BE(body.length, 0);
  head.write(type, 4, "latin1");
  const crcBuf = Buffer.alloc(4);
  crcBuf.writeUInt32BE(crc32(Buffer.concat([head.subarray(4), body])), 0);
  return Buffer.concat([head, body, crcBuf]);
}

export function encodePng(image: Image): Buffer {
  const { width, height, channels, data } = image;
  if (data.length !== width * height * channels) {
    throw new Error("image data length does not match dimensions");
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr.writeUInt8(8, 8); // bit depth
  ihdr.writeUInt8(channels === 1 ? 0 : 2, 9); // gray | truecolor
  const stride = width * channels;
  const raw = Buffer.alloc((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter: none
    raw.set(data.subarray(y * stride, (y + 1) * stride), y * (stride + 1) + 1);
  }
  const idat = deflateSync(raw, { level: 9 });
  return Buffer.concat([
    SIGNATURE,
    chunk("IHDR", ihdr),
    chunk("IDAT", idat),
    chunk("IEND", Buffer.alloc(0)),
  ]);
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export function decodePng(blob: Buffer, source = "<buffer>"): Image {
  if (blob.length < 8 || !blob.subarray(0, 8).equals(SIGNATURE)) {
    throw new Error(`${source}: not a PNG`);
  }
  let offset = 8;
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = 0;
  let palette: Buffer | null = null;
  const idat: Buffer[] = [];
  while (offset + 8 <= blob.length) {
    const length = blob.readUInt32BE(offset);
    const type = blob.subarray(offset + 4, offset + 8).toString("latin1");
    const body = blob.subarray(offset + 8, offset + 8 + length);
    offset += 12 + length;
    if (type === "IHDR") {
      width = body.readUInt32BE(0);
      height = body.readUInt32BE(4);
      bitDepth = body.readUInt8(8);
      colorType = body.readUInt8(9);
      if (body.readUInt8(12) !== 0) throw new Error(`${source}: interlaced PNG not supported`);
    } else if (type === "PLTE") {
      palette = Buffer.from(body);
    } else if (type === "IDAT") {
      idat.push(Buffer.from(body));
    } else if (type === "IEND") {
      break;
    }
  }
  if (bitDepth !== 8) throw new Error(`${source}: only 8-bit PNGs supported, got depth ${bitDepth}`);
  const srcChannels = { 0: 1, 2: 3, 3: 1, 4: 2, 6: 4 }[colorType];
  if (srcChannels === undefined) throw new Error(`${source}: unsupported color type ${colorType}`);
  const stride = width * srcChannels;
  const raw = inflateSync(Buffer.concat(idat));
  if (raw.length !== (stride + 1) * height) throw new Error(`${source}: bad scanline data`);

  const lines = Buffer.alloc(stride * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const out = lines.subarray(y * stride, (y + 1) * stride);
    const prev = y > 0 ? lines.subarray((y - 1) * stride, y * stride) : null;
    for (let x = 0; x < stride; x++) {
      const a = x >= srcChannels ? out[x - srcChannels] : 0;
      const b = prev ? prev[x] : 0;
      const c = prev && x >= srcChannels ? prev[x - srcChannels] : 0;
      let value = row[x];
      if (filter === 1) value += a;
      else if (filter === 2) value += b;
      else if (filter === 3) value += (a + b) >> 1;
      else if (filter === 4) value += paeth(a, b, c);
      else if (filter !== 0) throw new Error(`${source}: unknown filter ${filter}`);
      out[x] = value & 0xff;
    }
  }

  // normalize to gray or RGB
  if (colorType === 0) {
    return { width, height, channels: 1, data: Uint8Array.from(lines) };
  }
  if (colorType === 2) {
    return { width, height, channels: 3, data: Uint8Array.from(lines) };
  }
  if (colorType === 3) {
    if (!palette) throw new Error(`${source}: palette PNG without PLTE`);
    const rgb = new Uint8Array(width * height * 3);
    for (let i = 0; i < width * height; i++) {
      const idx = lines[i] * 3;
      rgb[i * 3] = palette[idx];
      rgb[i * 3 + 1] = palette[idx + 1];
      rgb[i * 3 + 2] = palette[idx + 2];
    }
    return { width, height, channels: 3, data: rgb };
  }
  // gray+alpha or RGBA: drop alpha
  const outChannels = colorType === 4 ? 1 : 3;
  const data = new Uint8Array(width * height * outChannels);
  for (let i = 0; i < width * height; i++) {
    for (let ch = 0; ch < outChannels; ch++) {
      data[i * outChannels + ch] = lines[i * srcChannels + ch];
    }
  }
  return { width, height, channels: outChannels as 1 | 3, data };
}

export function readPng(path: string): Image {
  return decodePng(readFileSync(path), path);
}

export function writePng(path: string, image: Image): void {
  writeFileSync(path, encodePng(image));
}

/** luma conversion matching the toolkit: 0.299 R + 0.587 G + 0.114 B, half-up */
export function toGray(image: Image): Uint8Array {
  if (image.channels === 1) return image.data;
  const out = new Uint8Array(image.width * image.height);
  for (let i = 0; i < out.length; i++) {
    const r = image.data[i * 3];
    const g = image.data[i * 3 + 1];
    const b = image.data[i * 3 + 2];
    out[i] = Math.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5);
  }
  return out;
}
