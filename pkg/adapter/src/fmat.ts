/**
 * FMT1 binary feature-matrix codec.
 *
 * Layout (little-endian):
 *   magic "FMT1"            4 bytes
 *   rows  uint32            4 bytes
 *   cols  uint32            4 bytes
 *   hopSeconds float64      8 bytes
 *   startOffsetSeconds f64  8 bytes
 *   values rows*cols float32, row-major
 *
 * Speaker embeddings are a single row; since a pooled vector has no real
 * hop, the hop field carries the sentinel value 1.0 (zero is invalid).
 */

import * as fs from "node:fs";

export const FMAT_MAGIC = "FMT1";
export const FMAT_HEADER_BYTES = 28;
export const EMBEDDING_HOP_SENTINEL = 1.0;

export interface FeatureMatrix {
  rows: number;
  cols: number;
  hopSeconds: number;
  startOffsetSeconds: number;
  /** row-major, length rows*cols */
  values: Float32Array;
}

export function makeMatrix(
  values: Float32Array,
  rows: number,
  cols: number,
  hopSeconds: number,
  startOffsetSeconds = 0
): FeatureMatrix {
  if (rows * cols !== values.length) {
    throw new Error(`shape ${rows}x${cols} does not match ${values.length} values`);
  }
  if (!(hopSeconds > 0)) {
    throw new Error(`hopSeconds must be > 0, got ${hopSeconds}`);
  }
  for (let i = 0; i < values.length; i++) {
    if (!Number.isFinite(values[i])) {
      throw new Error(`non-finite value at index ${i}`);
    }
  }
  return { rows, cols, hopSeconds, startOffsetSeconds, values };
}

export function encodeFmat(m: FeatureMatrix): Buffer {
  const buf = Buffer.alloc(FMAT_HEADER_BYTES + 4 * m.values.length);
  buf.write(FMAT_MAGIC, 0, "ascii");
  buf.writeUInt32LE(m.rows, 4);
  buf.writeUInt32LE(m.cols, 8);
  buf.writeDoubleLE(m.hopSeconds, 12);
  buf.writeDoubleLE(m.startOffsetSeconds, 20);
  for (let i = 0; i < m.values.length; i++) {
    buf.writeFloatLE(m.values[i], FMAT_HEADER_BYTES + 4 * i);
  }
  return buf;
}

export function decodeFmat(buf: Buffer): FeatureMatrix {
  if (buf.length < FMAT_HEADER_BYTES) {
    throw new Error(`truncated header: ${buf.length} bytes`);
  }
  if (buf.toString("ascii", 0, 4) !== FMAT_MAGIC) {
    throw new Error(`bad magic ${JSON.stringify(buf.toString("ascii", 0, 4))}`);
  }
  const rows = buf.readUInt32LE(4);
  const cols = buf.readUInt32LE(8);
  const hopSeconds = buf.readDoubleLE(12);
  const startOffsetSeconds = buf.readDoubleLE(20);
  const expected = FMAT_HEADER_BYTES + 4 * rows * cols;
  if (buf.length !== expected) {
    throw new Error(`size mismatch: ${buf.length} bytes, expected ${expected}`);
  }
  const values = new Float32Array(rows * cols);
  for (let i = 0; i < values.length; i++) {
    values[i] = buf.readFloatLE(FMAT_HEADER_BYTES + 4 * i);
    if (!Number.isFinite(values[i])) {
      throw new Error(`non-finite payload at index ${i}`);
    }
  }
  return { rows, cols, hopSeconds, startOffsetSeconds, values };
}

export function readFmat(path: string): FeatureMatrix {
  return decodeFmat(fs.readFileSync(path));
}
