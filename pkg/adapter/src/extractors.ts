/**
 * Extractor registry. model_id selects the backend:
 *
 *   builtin:mel       per-frame log-mel "encoder features" (20 ms hop)
 *   builtin:spectral  spectral-statistics speaker embedding
 *   hf:<model id>     transformers.js checkpoint (needs @huggingface/transformers
 *                     installed and the weights available)
 *
 * The adapter never post-processes model outputs; distance-metric choices
 * belong to the alignment side. Trailing frames a model pads past the audio
 * duration are truncated before writing.
 */

import { EMBEDDING_HOP_SENTINEL, FeatureMatrix, makeMatrix } from "./fmat.js";
import { DEFAULT_FRAME_OPTIONS, melFrameFeatures, spectralEmbedding } from "./dsp.js";
import { AudioBuffer, readWav } from "./wav.js";

export type ModelKind = "encoder_features" | "speaker_embedding";

export interface ExtractorSpec {
  modelKind: ModelKind;
  modelId: string;
  /** encoder layer to export, for backends that expose hidden states */
  layer?: number;
  device?: string;
  hopSeconds?: number;
}

export function defaultModelId(kind: ModelKind): string {
  return kind === "encoder_features" ? "builtin:mel" : "builtin:spectral";
}

export function truncateToDuration(m: FeatureMatrix, durationSeconds: number): FeatureMatrix {
  if (m.rows <= 1) return m;
  const maxRows = Math.ceil(durationSeconds / m.hopSeconds) + 1;
  if (m.rows <= maxRows) return m;
  return makeMatrix(m.values.slice(0, maxRows * m.cols), maxRows, m.cols, m.hopSeconds, m.startOffsetSeconds);
}

async function externalModelMatrix(spec: ExtractorSpec, audio: AudioBuffer): Promise<FeatureMatrix> {
  const modelId = spec.modelId.replace(/^hf:/, "");
  let transformers: any;
  try {
    // optional backend, resolved at runtime only
    transformers = await import("@huggingface/transformers" as string);
  } catch {
    throw new Error(
      `model backend unavailable for ${JSON.stringify(spec.modelId)}: ` +
        "install @huggingface/transformers to run pretrained checkpoints, " +
        "or use builtin:mel / builtin:spectral"
    );
  }
  const extractor = await transformers.pipeline("feature-extraction", modelId, {
    device: spec.device ?? "cpu",
  });
  const result = await extractor(audio.samples, { pooling: spec.modelKind === "speaker_embedding" ? "mean" : "none" });
  const dims: number[] = result.dims ?? [1, result.data.length];
  const rows = dims.length >= 2 ? dims[dims.length - 2] : 1;
  const cols = dims[dims.length - 1];
  const values = Float32Array.from(result.data as ArrayLike<number>);
  const duration = audio.samples.length / audio.sampleRate;
  const hop = spec.modelKind === "speaker_embedding" ? EMBEDDING_HOP_SENTINEL : spec.hopSeconds ?? duration / rows;
  return makeMatrix(values.slice(0, rows * cols), rows, cols, hop, 0);
}

export async function extractMatrix(spec: ExtractorSpec, wavPath: string): Promise<FeatureMatrix> {
  const audio = readWav(wavPath);
  const duration = audio.samples.length / audio.sampleRate;

  let matrix: FeatureMatrix;
  if (spec.modelId === "builtin:mel") {
    if (spec.modelKind !== "encoder_features") {
      throw new Error("builtin:mel provides encoder_features, not speaker embeddings");
    }
    const opts = { ...DEFAULT_FRAME_OPTIONS, hopSeconds: spec.hopSeconds ?? DEFAULT_FRAME_OPTIONS.hopSeconds };
    const { values, rows, cols } = melFrameFeatures(audio.samples, audio.sampleRate, opts);
    matrix = makeMatrix(values, rows, cols, opts.hopSeconds, 0);
  } else if (spec.modelId === "builtin:spectral") {
    if (spec.modelKind !== "speaker_embedding") {
      throw new Error("builtin:spectral provides speaker embeddings, not frame features");
    }
    const emb = spectralEmbedding(audio.samples, audio.sampleRate);
    matrix = makeMatrix(emb, 1, emb.length, EMBEDDING_HOP_SENTINEL, 0);
  } else {
    matrix = await externalModelMatrix(spec, audio);
  }
  return truncateToDuration(matrix, duration);
}
