/**
 * Built-in deterministic extractor backends: per-frame log-mel features at a
 * fixed hop (an offline stand-in with the same shape contract as encoder
 * hidden states) and a spectral-statistics speaker embedding.
 */

export function fft(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  if ((n & (n - 1)) !== 0) throw new Error(`FFT size must be a power of two, got ${n}`);
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      [re[i], re[j]] = [re[j], re[i]];
      [im[i], im[j]] = [im[j], im[i]];
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const ang = (-2 * Math.PI) / len;
    const wRe = Math.cos(ang);
    const wIm = Math.sin(ang);
    for (let i = 0; i < n; i += len) {
      let curRe = 1;
      let curIm = 0;
      for (let k = 0; k < len / 2; k++) {
        const uRe = re[i + k];
        const uIm = im[i + k];
        const vRe = re[i + k + len / 2] * curRe - im[i + k + len / 2] * curIm;
        const vIm = re[i + k + len / 2] * curIm + im[i + k + len / 2] * curRe;
        re[i + k] = uRe + vRe;
        im[i + k] = uIm + vIm;
        re[i + k + len / 2] = uRe - vRe;
        im[i + k + len / 2] = uIm - vIm;
        const nextRe = curRe * wRe - curIm * wIm;
        curIm = curRe * wIm + curIm * wRe;
        curRe = nextRe;
      }
    }
  }
}

function hzToMel(hz: number): number {
  return 2595 * Math.log10(1 + hz / 700);
}

function melToHz(mel: number): number {
  return 700 * (10 ** (mel / 2595) - 1);
}

export function melFilterbank(sampleRate: number, nFft: number, nMels: number): Float64Array[] {
  const nBins = nFft / 2 + 1;
  const edges: number[] = [];
  const melMax = hzToMel(sampleRate / 2);
  for (let i = 0; i < nMels + 2; i++) edges.push(melToHz((melMax * i) / (nMels + 1)));
  const filters: Float64Array[] = [];
  for (let m = 0; m < nMels; m++) {
    const f = new Float64Array(nBins);
    const [lo, center, hi] = [edges[m], edges[m + 1], edges[m + 2]];
    for (let b = 0; b < nBins; b++) {
      const hz = (b * sampleRate) / nFft;
      const up = (hz - lo) / Math.max(center - lo, 1e-12);
      const down = (hi - hz) / Math.max(hi - center, 1e-12);
      f[b] = Math.max(0, Math.min(up, down));
    }
    filters.push(f);
  }
  return filters;
}

export interface FrameFeatureOptions {
  hopSeconds: number;
  frameSeconds: number;
  nMels: number;
  floor: number;
}

export const DEFAULT_FRAME_OPTIONS: FrameFeatureOptions = {
  hopSeconds: 0.02,
  frameSeconds: 0.025,
  nMels: 80,
  floor: 1e-10,
};

/**
 * Log-mel energies per hop; frame count is ceil(duration / hop) so the rows
 * cover the whole signal (the tail frame is zero-padded, never emitted past
 * the audio duration).
 */
export function melFrameFeatures(
  samples: Float64Array,
  sampleRate: number,
  opts: FrameFeatureOptions = DEFAULT_FRAME_OPTIONS
): { values: Float32Array; rows: number; cols: number } {
  const hop = Math.max(1, Math.round(opts.hopSeconds * sampleRate));
  const frame = Math.max(2, Math.round(opts.frameSeconds * sampleRate));
  let nFft = 2;
  while (nFft < frame) nFft <<= 1;
  const rows = Math.max(1, Math.ceil(samples.length / hop));
  const filters = melFilterbank(sampleRate, nFft, opts.nMels);
  const window = new Float64Array(frame);
  for (let i = 0; i < frame; i++) window[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / (frame - 1));

  const values = new Float32Array(rows * opts.nMels);
  const re = new Float64Array(nFft);
  const im = new Float64Array(nFft);
  for (let r = 0; r < rows; r++) {
    re.fill(0);
    im.fill(0);
    const start = r * hop;
    for (let i = 0; i < frame && start + i < samples.length; i++) {
      re[i] = samples[start + i] * window[i];
    }
    fft(re, im);
    for (let m = 0; m < opts.nMels; m++) {
      let e = 0;
      const f = filters[m];
      for (let b = 0; b < f.length; b++) {
        e += f[b] * (re[b] * re[b] + im[b] * im[b]);
      }
      values[r * opts.nMels + m] = Math.log(e + opts.floor);
    }
  }
  return { values, rows, cols: opts.nMels };
}

/**
 * Deterministic utterance-level embedding: per-mel mean, standard deviation
 * and mean absolute delta of the log-mel track, L2-normalized. 3 * nMels
 * dimensions (240 with the defaults).
 */
export function spectralEmbedding(samples: Float64Array, sampleRate: number, nMels = 80): Float32Array {
  const { values, rows, cols } = melFrameFeatures(samples, sampleRate, {
    ...DEFAULT_FRAME_OPTIONS,
    nMels,
  });
  const dim = 3 * cols;
  const emb = new Float64Array(dim);
  for (let m = 0; m < cols; m++) {
    let mean = 0;
    for (let r = 0; r < rows; r++) mean += values[r * cols + m];
    mean /= rows;
    let varAcc = 0;
    let deltaAcc = 0;
    for (let r = 0; r < rows; r++) {
      const v = values[r * cols + m];
      varAcc += (v - mean) * (v - mean);
      if (r > 0) deltaAcc += Math.abs(v - values[(r - 1) * cols + m]);
    }
    emb[m] = mean;
    emb[cols + m] = Math.sqrt(varAcc / rows);
    emb[2 * cols + m] = rows > 1 ? deltaAcc / (rows - 1) : 0;
  }
  let norm = 0;
  for (let i = 0; i < dim; i++) norm += emb[i] * emb[i];
  norm = Math.sqrt(norm) || 1;
  const out = new Float32Array(dim);
  for (let i = 0; i < dim; i++) out[i] = emb[i] / norm;
  return out;
}
