/**
 * Checkpoint-to-container conversion: resolve every slot through the
 * manifest, quantize with the shared rounding rule (8-bit everywhere,
 * 16-bit output layer), serialize, and emit a verification sidecar.
 */
import {
  DspConfig, LstmLayerData, DenseLayerData, ModelData, Tensor1D, Tensor2D,
  LSTM_BIAS_NAMES, LSTM_MATRIX_NAMES, binsOf, paramCount,
} from "./model";
import { Manifest, ManifestError, resolveSlot } from "./manifest";
import { Checkpoint } from "./safetensors";
import { Q8, Q16, QuantFormat, quantizeArray } from "./quant";
import { serializeModel } from "./container";
import { weightHash } from "./hash";

export interface ExportResult {
  container: Buffer;
  sidecar: {
    weight_hash: string;
    param_count: number;
    saturated_weights: number;
    saturated_by_slot: Record<string, number>;
  };
}

interface Quantized2D {
  tensor: Tensor2D;
  saturated: number;
}

function quantize2D(rows: number, cols: number, data: Float64Array, fmt: QuantFormat): Quantized2D {
  const { codes, saturated } = quantizeArray(data, fmt);
  return { tensor: { rows, cols, codes, bits: fmt.bits }, saturated };
}

export function exportCheckpoint(ckpt: Checkpoint, manifest: Manifest,
                                 dsp: DspConfig): ExportResult {
  const saturatedBySlot: Record<string, number> = {};
  let saturated = 0;

  const grab = (slot: string) => resolveSlot(ckpt, slot, manifest.slots[slot]);

  const matrix = (slot: string, fmt: QuantFormat): Tensor2D => {
    const r = grab(slot);
    const q = quantize2D(r.rows, r.cols, r.data, fmt);
    if (q.saturated > 0) {
      saturatedBySlot[slot] = q.saturated;
      saturated += q.saturated;
      console.warn(`${slot}: ${q.saturated} weights saturated to the format range`);
    }
    return q.tensor;
  };

  const vector = (slot: string, fmt: QuantFormat): Tensor1D => {
    const r = grab(slot);
    if (r.rows !== 1 && r.cols !== 1) throw new ManifestError(`${slot}: expected a vector`);
    const q = quantizeArray(r.data, fmt);
    if (q.saturated > 0) {
      saturatedBySlot[slot] = q.saturated;
      saturated += q.saturated;
      console.warn(`${slot}: ${q.saturated} values saturated to the format range`);
    }
    return { codes: q.codes, bits: fmt.bits };
  };

  const floats = (slot: string): { rows: number; cols: number; data: Float64Array } => grab(slot);

  const lstm = (name: "lstm1" | "lstm2"): LstmLayerData => {
    const matrices = {} as LstmLayerData["matrices"];
    for (const m of LSTM_MATRIX_NAMES) matrices[m] = matrix(`${name}.${m}`, Q8);
    const biases = {} as LstmLayerData["biases"];
    for (const b of LSTM_BIAS_NAMES) biases[b] = vector(`${name}.${b}`, Q8);
    return { kind: "lstm", matrices, biases };
  };

  const dense = (name: "dense1" | "dense2", activation: "tanh" | "sigmoid",
                 fmt: QuantFormat): DenseLayerData => ({
    kind: "dense",
    activation,
    w: matrix(`${name}.w`, fmt),
    b: vector(`${name}.b`, fmt),
  });

  const gain = floats("qeq.gain");
  const bias = floats("qeq.bias");
  const fb = floats("filterbank");
  if (fb.rows !== dsp.mel_bins || fb.cols !== binsOf(dsp)) {
    throw new ManifestError(
      `filterbank: expected ${dsp.mel_bins}x${binsOf(dsp)}, got ${fb.rows}x${fb.cols}`);
  }

  const model: ModelData = {
    dsp,
    qeqGain: gain.data,
    qeqBias: bias.data,
    filterbank: fb.data,
    lstm1: lstm("lstm1"),
    lstm2: lstm("lstm2"),
    dense1: dense("dense1", "tanh", Q8),
    dense2: dense("dense2", "sigmoid", Q16),
  };
  const container = serializeModel(model);
  return {
    container,
    sidecar: {
      weight_hash: weightHash(model),
      param_count: paramCount(model),
      saturated_weights: saturated,
      saturated_by_slot: saturatedBySlot,
    },
  };
}
