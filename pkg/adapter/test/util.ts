/** Shared test fixtures: tiny WAV encoders and temp dirs. */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

export function encodePcm16Wav(samples: Float64Array, sampleRate: number, channels = 1): Buffer {
  const data = Buffer.alloc(2 * samples.length);
  for (let i = 0; i < samples.length; i++) {
    const q = Math.max(-32768, Math.min(32767, Math.round(samples[i] * 32768)));
    data.writeInt16LE(q, 2 * i);
  }
  return wrapRiff(data, 1, channels, sampleRate, 16);
}

export function encodeFloat32Wav(samples: Float64Array, sampleRate: number, channels = 1): Buffer {
  const data = Buffer.alloc(4 * samples.length);
  for (let i = 0; i < samples.length; i++) data.writeFloatLE(samples[i], 4 * i);
  return wrapRiff(data, 3, channels, sampleRate, 32);
}

function wrapRiff(data: Buffer, format: number, channels: number, sampleRate: number, bits: number): Buffer {
  const block = (channels * bits) / 8;
  const fmt = Buffer.alloc(16);
  fmt.writeUInt16LE(format, 0);
  fmt.writeUInt16LE(channels, 2);
  fmt.writeUInt32LE(sampleRate, 4);
  fmt.writeUInt32LE(sampleRate * block, 8);
  fmt.writeUInt16LE(block, 12);
  fmt.writeUInt16LE(bits, 14);
  const chunks = [
    Buffer.from("fmt "),
    uint32(fmt.length),
    fmt,
    Buffer.from("data"),
    uint32(data.length),
    data,
  ];
  if (data.length % 2 === 1) chunks.push(Buffer.from([0]));
  const body = Buffer.concat(chunks);
  return Buffer.concat([Buffer.from("RIFF"), uint32(4 + body.length), Buffer.from("WAVE"), body]);
}

function uint32(v: number): Buffer {
  const b = Buffer.alloc(4);
  b.writeUInt32LE(v, 0);
  return b;
}

export function sine(freqHz: number, durationS: number, sampleRate: number, amp = 0.6): Float64Array {
  const n = Math.round(durationS * sampleRate);
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) out[i] = amp * Math.sin((2 * Math.PI * freqHz * i) / sampleRate);
  return out;
}

export function tempDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}
