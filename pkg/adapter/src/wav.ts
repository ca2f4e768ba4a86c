/**
 * Minimal RIFF/WAVE reader: PCM16 and IEEE float32, any channel count
 * (downmixed by channel mean). Matches what the alignment toolkit writes.
 */

import * as fs from "node:fs";

export interface AudioBuffer {
  samples: Float64Array;
  sampleRate: number;
}

const FORMAT_PCM = 0x0001;
const FORMAT_IEEE_FLOAT = 0x0003;
const FORMAT_EXTENSIBLE = 0xfffe;

export function decodeWav(buf: Buffer, name = "<buffer>"): AudioBuffer {
  if (buf.length < 12 || buf.toString("ascii", 0, 4) !== "RIFF" || buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error(`${name}: not a RIFF/WAVE file`);
  }
  let fmt: Buffer | null = null;
  let data: Buffer | null = null;
  let pos = 12;
  while (pos + 8 <= buf.length) {
    const id = buf.toString("ascii", pos, pos + 4);
    const size = buf.readUInt32LE(pos + 4);
    const body = buf.subarray(pos + 8, pos + 8 + size);
    if (id === "fmt ") fmt = body;
    else if (id === "data") data = body;
    pos += 8 + size + (size % 2); // chunks are word-aligned
  }
  if (!fmt || fmt.length < 16) throw new Error(`${name}: missing fmt chunk`);
  if (!data) throw new Error(`${name}: missing data chunk`);

  let format = fmt.readUInt16LE(0);
  const channels = fmt.readUInt16LE(2);
  const sampleRate = fmt.readUInt32LE(4);
  const bits = fmt.readUInt16LE(14);
  if (format === FORMAT_EXTENSIBLE && fmt.length >= 26) {
    format = fmt.readUInt16LE(24);
  }
  if (channels < 1) throw new Error(`${name}: zero channels`);

  let flat: Float64Array;
  if (format === FORMAT_PCM && bits === 16) {
    const n = Math.floor(data.length / 2);
    flat = new Float64Array(n);
    for (let i = 0; i < n; i++) flat[i] = data.readInt16LE(2 * i) / 32768;
  } else if (format === FORMAT_IEEE_FLOAT && bits === 32) {
    const n = Math.floor(data.length / 4);
    flat = new Float64Array(n);
    for (let i = 0; i < n; i++) flat[i] = data.readFloatLE(4 * i);
  } else {
    throw new Error(`${name}: unsupported encoding (format ${format}, ${bits} bits)`);
  }

  const frames = Math.floor(flat.length / channels);
  if (frames === 0) throw new Error(`${name}: zero-length audio`);
  if (channels === 1) return { samples: flat.subarray(0, frames), sampleRate };
  const mono = new Float64Array(frames);
  for (let i = 0; i < frames; i++) {
    let acc = 0;
    for (let c = 0; c < channels; c++) acc += flat[i * channels + c];
    mono[i] = acc / channels;
  }
  return { samples: mono, sampleRate };
}

export function readWav(path: string): AudioBuffer {
  let buf: Buffer;
  try {
    buf = fs.readFileSync(path);
  } catch (err) {
    throw new Error(`cannot read ${path}: ${(err as Error).message}`);
  }
  return decodeWav(buf, path);
}
