/** In-memory description of a dense model about to be serialized. */

export interface DspConfig {
  sample_rate: number;
  frame_size: number;
  hop_size: number;
  mel_bins: number;
  power_exponent: number;
}

export interface Tensor2D {
  rows: number;
  cols: number;
  /** row-major integer codes */
  codes: Int16Array;
  bits: 8 | 16;
}

export interface Tensor1D {
  codes: Int16Array;
  bits: 8 | 16;
}

export const LSTM_MATRIX_NAMES = [
  "w_xi", "w_hi", "w_xf", "w_hf", "w_xo", "w_ho", "w_xc", "w_hc",
] as const;
export const LSTM_BIAS_NAMES = ["b_i", "b_f", "b_o", "b_u"] as const;

export interface LstmLayerData {
  kind: "lstm";
  matrices: Record<(typeof LSTM_MATRIX_NAMES)[number], Tensor2D>;
  biases: Record<(typeof LSTM_BIAS_NAMES)[number], Tensor1D>;
}

export interface DenseLayerData {
  kind: "dense";
  activation: "tanh" | "sigmoid";
  w: Tensor2D;
  b: Tensor1D;
}

export interface ModelData {
  dsp: DspConfig;
  qeqGain: Float64Array;
  qeqBias: Float64Array;
  /** mel_bins x bins, row-major */
  filterbank: Float64Array;
  lstm1: LstmLayerData;
  lstm2: LstmLayerData;
  dense1: DenseLayerData;
  dense2: DenseLayerData;
}

export function binsOf(dsp: DspConfig): number {
  return dsp.frame_size / 2 + 1;
}

export function paramCount(model: ModelData): number {
  let n = 0;
  for (const layer of [model.lstm1, model.lstm2]) {
    for (const name of LSTM_MATRIX_NAMES) n += layer.matrices[name].codes.length;
    for (const name of LSTM_BIAS_NAMES) n += layer.biases[name].codes.length;
  }
  for (const layer of [model.dense1, model.dense2]) {
    n += layer.w.codes.length + layer.b.codes.length;
  }
  return n;
}

export function validateModel(model: ModelData): void {
  const { dsp } = model;
  const bins = binsOf(dsp);
  if (dsp.hop_size * 2 !== dsp.frame_size) throw new Error("hop must be half the frame");
  if (model.qeqGain.length !== dsp.mel_bins || model.qeqBias.length !== dsp.mel_bins) {
    throw new Error("EQ length must equal the band count");
  }
  if (model.filterbank.length !== dsp.mel_bins * bins) {
    throw new Error("filterbank must be mel_bins x bins");
  }
  const chain: Array<[string, Tensor2D, number]> = [
    ["lstm1", model.lstm1.matrices.w_xi, dsp.mel_bins],
    ["lstm2", model.lstm2.matrices.w_xi, model.lstm1.matrices.w_xi.rows],
    ["dense1", model.dense1.w, model.lstm2.matrices.w_xi.rows],
    ["dense2", model.dense2.w, model.dense1.w.rows],
  ];
  for (const [name, t, expectCols] of chain) {
    if (t.cols !== expectCols) {
      throw new Error(`${name}: input width ${t.cols}, expected ${expectCols}`);
    }
    if (t.codes.length !== t.rows * t.cols) throw new Error(`${name}: bad tensor size`);
  }
  if (model.dense2.w.rows !== dsp.mel_bins) {
    throw new Error("dense2 must emit one mask value per band");
  }
  for (const layer of [model.lstm1, model.lstm2]) {
    const h = layer.matrices.w_xi.rows;
    for (const name of LSTM_MATRIX_NAMES) {
      const t = layer.matrices[name];
      if (t.bits !== 8) throw new Error(`${name}: LSTM weights must be 8-bit`);
      if (t.rows !== h) throw new Error(`${name}: output size mismatch`);
      if (name.includes("h") && t.cols !== h) throw new Error(`${name}: recurrent width mismatch`);
    }
    for (const name of LSTM_BIAS_NAMES) {
      if (layer.biases[name].codes.length !== h) throw new Error(`${name}: bias length mismatch`);
    }
  }
  if (model.dense1.activation !== "tanh" || model.dense1.w.bits !== 8) {
    throw new Error("dense1 must be an 8-bit tanh layer");
  }
  if (model.dense2.activation !== "sigmoid" || model.dense2.w.bits !== 16) {
    throw new Error("dense2 must be a 16-bit sigmoid layer");
  }
}
