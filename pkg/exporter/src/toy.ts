/**
 * Reproducible desk-scale models for engine tests: seeded weights through
 * the same quantizer as real exports, plus a triangular mel filterbank.
 * Identical seed and dimensions always produce identical bytes.
 */
import {
  DenseLayerData, DspConfig, LstmLayerData, ModelData,
  LSTM_BIAS_NAMES, LSTM_MATRIX_NAMES, Tensor1D, Tensor2D, binsOf,
} from "./model";
import { Q8, Q16, QuantFormat, quantizeArray } from "./quant";
import { serializeModel } from "./container";
import { weightHash } from "./hash";
import { paramCount } from "./model";

/** mulberry32: tiny deterministic PRNG, uniform floats in [0, 1). */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function uniform(rng: () => number, lo: number, hi: number, n: number): Float64Array {
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) out[i] = lo + (hi - lo) * rng();
  return out;
}

function tensor(rng: () => number, rows: number, cols: number, scale: number,
                fmt: QuantFormat): Tensor2D {
  const { codes } = quantizeArray(uniform(rng, -scale, scale, rows * cols), fmt);
  return { rows, cols, codes, bits: fmt.bits };
}

function biasVec(rng: () => number, n: number, fmt: QuantFormat): Tensor1D {
  const { codes } = quantizeArray(uniform(rng, -0.1, 0.1, n), fmt);
  return { codes, bits: fmt.bits };
}

function lstmLayer(rng: () => number, hidden: number, input: number): LstmLayerData {
  const sx = 1.0 / Math.sqrt(input);
  const sh = 0.5 / Math.sqrt(hidden);
  const matrices = {} as LstmLayerData["matrices"];
  for (const name of LSTM_MATRIX_NAMES) {
    matrices[name] = name.includes("x")
      ? tensor(rng, hidden, input, sx, Q8)
      : tensor(rng, hidden, hidden, sh, Q8);
  }
  const biases = {} as LstmLayerData["biases"];
  for (const name of LSTM_BIAS_NAMES) biases[name] = biasVec(rng, hidden, Q8);
  return { kind: "lstm", matrices, biases };
}

function hzToMel(f: number): number {
  return 2595.0 * Math.log10(1.0 + f / 700.0);
}

function melToHz(m: number): number {
  return 700.0 * (Math.pow(10.0, m / 2595.0) - 1.0);
}

/** Triangular filters, mel-spaced 0..Nyquist, peak-normalized per band. */
export function melFilterbank(dsp: DspConfig): Float64Array {
  const bins = binsOf(dsp);
  const bands = dsp.mel_bins;
  const topMel = hzToMel(dsp.sample_rate / 2);
  const edges = new Float64Array(bands + 2);
  for (let i = 0; i < bands + 2; i++) edges[i] = melToHz((topMel * i) / (bands + 1));
  const out = new Float64Array(bands * bins);
  for (let b = 0; b < bands; b++) {
    const [lo, ctr, hi] = [edges[b], edges[b + 1], edges[b + 2]];
    let peak = 0;
    let nearest = 0;
    let nearestDist = Infinity;
    for (let k = 0; k < bins; k++) {
      const f = (k * dsp.sample_rate) / dsp.frame_size;
      const up = (f - lo) / Math.max(ctr - lo, 1e-12);
      const down = (hi - f) / Math.max(hi - ctr, 1e-12);
      const tri = Math.max(0, Math.min(up, down));
      out[b * bins + k] = tri;
      peak = Math.max(peak, tri);
      const dist = Math.abs(f - ctr);
      if (dist < nearestDist) {
        nearestDist = dist;
        nearest = k;
      }
    }
    if (peak <= 0) {
      out[b * bins + nearest] = 1.0; // filter narrower than one bin
      peak = 1.0;
    }
    for (let k = 0; k < bins; k++) out[b * bins + k] /= peak;
  }
  return out;
}

export interface ToyOptions {
  seed: number;
  /** [mel bands, lstm1 hidden, lstm2 hidden, dense1 width] */
  dims: [number, number, number, number];
  frame_size?: number;
  sample_rate?: number;
}

export interface ToyResult {
  container: Buffer;
  sidecar: { weight_hash: string; param_count: number; seed: number };
}

export function makeToyModel(opts: ToyOptions): ToyResult {
  const [mel, h1, h2, d1] = opts.dims;
  const dsp: DspConfig = {
    sample_rate: opts.sample_rate ?? 16000,
    frame_size: opts.frame_size ?? 512,
    hop_size: (opts.frame_size ?? 512) / 2,
    mel_bins: mel,
    power_exponent: 0.3,
  };
  const rng = mulberry32(opts.seed);
  const dense1: DenseLayerData = {
    kind: "dense", activation: "tanh",
    w: tensor(rng, d1, h2, 0.3, Q8), b: biasVec(rng, d1, Q8),
  };
  const dense2: DenseLayerData = {
    kind: "dense", activation: "sigmoid",
    w: tensor(rng, mel, d1, 0.5, Q16), b: biasVec(rng, mel, Q16),
  };
  const model: ModelData = {
    dsp,
    qeqGain: uniform(rng, 0.5, 1.5, mel),
    qeqBias: uniform(rng, -0.2, 0.2, mel),
    filterbank: melFilterbank(dsp),
    lstm1: lstmLayer(rng, h1, mel),
    lstm2: lstmLayer(rng, h2, h1),
    dense1,
    dense2,
  };
  return {
    container: serializeModel(model),
    sidecar: {
      weight_hash: weightHash(model),
      param_count: paramCount(model),
      seed: opts.seed,
    },
  };
}
