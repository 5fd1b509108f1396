/**
 * The ".act" activation container shared with the prodg toolkit.
 *
 * Layout: magic "PDGACT1\0", u32 LE entry count, then per entry a u16 LE
 * name length, the UTF-8 name, u32 LE C, H, W, and C*H*W float32 LE
 * values.  Reads are strict: any truncation or trailing bytes fail.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { Tensor, tensorFrom } from "./tensor.js";

const MAGIC = Buffer.from("PDGACT1\0", "latin1");

export interface NamedGrid {
  name: string;
  tensor: Tensor; // shape [C, H, W]
}

export class MalformedContainerError extends Error {}

export function encodeAct(grids: NamedGrid[]): Buffer {
  const parts: Buffer[] = [MAGIC];
  const count = Buffer.alloc(4);
  count.writeUInt32LE(grids.length, 0);
  parts.push(count);
  for (const grid of grids) {
    const name = Buffer.from(grid.name, "utf-8");
    if (name.length > 0xffff) throw new Error(`grid name too long: ${grid.name}`);
    if (grid.tensor.shape.length !== 3) {
      throw new Error(`grid ${grid.name} must be [C, H, W], got [${grid.tensor.shape.join(", ")}]`);
    }
    const header = Buffer.alloc(2 + name.length + 12);
    header.writeUInt16LE(name.length, 0);
    name.copy(header, 2);
    const [c, h, w] = grid.tensor.shape;
    header.writeUInt32LE(c, 2 + name.length);
    header.writeUInt32LE(h, 2 + name.length + 4);
    header.writeUInt32LE(w, 2 + name.length + 8);
    parts.push(header);
    const data = Buffer.alloc(grid.tensor.data.length * 4);
    for (let i = 0; i < grid.tensor.data.length; i++) {
      data.writeFloatLE(grid.tensor.data[i], i * 4);
    }
    parts.push(data);
  }
  return Buffer.concat(parts);
}

export function decodeAct(blob: Buffer, source = "<buffer>"): NamedGrid[] {
  if (blob.length < MAGIC.length + 4 || !blob.subarray(0, MAGIC.length).equals(MAGIC)) {
    throw new MalformedContainerError(`${source}: bad magic or truncated header`);
  }
  let offset = MAGIC.length;
  const count = blob.readUInt32LE(offset);
  offset += 4;
  const grids: NamedGrid[] = [];
  for (let k = 0; k < count; k++) {
    if (offset + 2 > blob.length) {
      throw new MalformedContainerError(`${source}: truncated entry header`);
    }
    const nameLen = blob.readUInt16LE(offset);
    offset += 2;
    if (offset + nameLen + 12 > blob.length) {
      throw new MalformedContainerError(`${source}: truncated entry name or dims`);
    }
    const name = blob.subarray(offset, offset + nameLen).toString("utf-8");
    offset += nameLen;
    const c = blob.readUInt32LE(offset);
    const h = blob.readUInt32LE(offset + 4);
    const w = blob.readUInt32LE(offset + 8);
    offset += 12;
    const nbytes = c * h * w * 4;
    if (offset + nbytes > blob.length) {
      throw new MalformedContainerError(`${source}: truncated data for entry "${name}"`);
    }
    const data = new Float32Array(c * h * w);
    for (let i = 0; i < data.length; i++) {
      data[i] = blob.readFloatLE(offset + i * 4);
    }
    offset += nbytes;
    grids.push({ name, tensor: tensorFrom([c, h, w], data) });
  }
  if (offset !== blob.length) {
    throw new MalformedContainerError(`${source}: ${blob.length - offset} trailing bytes`);
  }
  return grids;
}

export function readAct(path: string): NamedGrid[] {
  return decodeAct(readFileSync(path), path);
}

export function writeAct(path: string, grids: NamedGrid[]): void {
  writeFileSync(path, encodeAct(grids));
}
