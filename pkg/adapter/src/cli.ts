#!/usr/bin/env node
/**
 * elign-adapter: export speech-model features as FMT1 files.
 *
 *   elign-adapter extract --model-kind encoder_features --model-id builtin:mel \
 *       --in utt.wav --out utt.fmat [--hop-seconds 0.02] [--layer N] [--device cpu]
 *
 *   elign-adapter batch-extract --manifest corpus.jsonl --out-dir feats/ \
 *       --model-kind encoder_features [--model-id builtin:mel]
 *
 * batch-extract writes one FMAT per manifest record, a manifest copy with
 * features_path filled in, and a failures log; one bad file never aborts the
 * batch.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { writeFileAtomic } from "./atomic.js";
import { encodeFmat } from "./fmat.js";
import { defaultModelId, extractMatrix, ExtractorSpec, ModelKind } from "./extractors.js";

interface Flags {
  [key: string]: string;
}

function parseFlags(argv: string[]): Flags {
  const flags: Flags = {};
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) throw new UsageError(`unexpected argument ${JSON.stringify(arg)}`);
    const key = arg.slice(2);
    const value = argv[i + 1];
    if (value === undefined || value.startsWith("--")) throw new UsageError(`flag --${key} needs a value`);
    flags[key] = value;
    i++;
  }
  return flags;
}

class UsageError extends Error {}

function need(flags: Flags, key: string): string {
  const v = flags[key];
  if (v === undefined) throw new UsageError(`missing required flag --${key}`);
  return v;
}

function specFromFlags(flags: Flags): ExtractorSpec {
  const kind = need(flags, "model-kind");
  if (kind !== "encoder_features" && kind !== "speaker_embedding") {
    throw new UsageError(`--model-kind must be encoder_features or speaker_embedding, got ${kind}`);
  }
  const modelKind = kind as ModelKind;
  return {
    modelKind,
    modelId: flags["model-id"] ?? defaultModelId(modelKind),
    layer: flags["layer"] !== undefined ? Number(flags["layer"]) : undefined,
    device: flags["device"],
    hopSeconds: flags["hop-seconds"] !== undefined ? Number(flags["hop-seconds"]) : undefined,
  };
}

async function cmdExtract(flags: Flags): Promise<number> {
  const spec = specFromFlags(flags);
  const input = need(flags, "in");
  const output = need(flags, "out");
  const matrix = await extractMatrix(spec, input);
  writeFileAtomic(output, encodeFmat(matrix));
  process.stdout.write(
    JSON.stringify(
      { input, output, rows: matrix.rows, cols: matrix.cols, hop_seconds: matrix.hopSeconds },
      null,
      2
    ) + "\n"
  );
  return 0;
}

interface ManifestRecord {
  utt_id: string;
  audio_path: string;
  [key: string]: unknown;
}

async function cmdBatchExtract(flags: Flags): Promise<number> {
  const spec = specFromFlags(flags);
  const manifestPath = need(flags, "manifest");
  const outDir = need(flags, "out-dir");
  fs.mkdirSync(outDir, { recursive: true });

  const lines = fs.readFileSync(manifestPath, "utf-8").split("\n");
  const outRecords: string[] = [];
  const failures: { utt_id: string; reason: string }[] = [];
  let ok = 0;
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let record: ManifestRecord;
    try {
      record = JSON.parse(line) as ManifestRecord;
      if (!record.utt_id || !record.audio_path) throw new Error("record needs utt_id and audio_path");
    } catch (err) {
      failures.push({ utt_id: `line ${i + 1}`, reason: (err as Error).message });
      continue;
    }
    const target = path.join(outDir, `${record.utt_id}.fmat`);
    try {
      const matrix = await extractMatrix(spec, record.audio_path);
      writeFileAtomic(target, encodeFmat(matrix));
      outRecords.push(JSON.stringify({ ...record, features_path: target }));
      ok++;
    } catch (err) {
      failures.push({ utt_id: record.utt_id, reason: (err as Error).message });
    }
  }

  const manifestOut = path.join(outDir, "manifest.jsonl");
  fs.writeFileSync(manifestOut, outRecords.map((r) => r + "\n").join(""));
  const failuresOut = path.join(outDir, "failures.jsonl");
  fs.writeFileSync(failuresOut, failures.map((f) => JSON.stringify(f) + "\n").join(""));
  process.stdout.write(
    JSON.stringify({ extracted: ok, failures: failures.length, manifest: manifestOut, failures_log: failuresOut }, null, 2) + "\n"
  );
  return failures.length > 0 ? 1 : 0;
}

const USAGE = `usage:
  elign-adapter extract --model-kind <encoder_features|speaker_embedding> --in <wav> --out <fmat>
                        [--model-id <id>] [--hop-seconds <s>] [--layer <n>] [--device <d>]
  elign-adapter batch-extract --model-kind <kind> --manifest <jsonl> --out-dir <dir>
                        [--model-id <id>] [--hop-seconds <s>]
`;

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    if (command === "extract") return await cmdExtract(parseFlags(rest));
    if (command === "batch-extract") return await cmdBatchExtract(parseFlags(rest));
    throw new UsageError(`unknown command ${JSON.stringify(command ?? "")}`);
  } catch (err) {
    if (err instanceof UsageError) {
      process.stderr.write(`error: ${err.message}\n${USAGE}`);
      return 2;
    }
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

const isDirectRun = process.argv[1] !== undefined && import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (isDirectRun) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
