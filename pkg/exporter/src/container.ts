/**
 * SSEM container writer. Layout mirrors docs/container-format.md in the
 * repository root; the engine's loader is the compatibility authority.
 * Only dense matrix encoding is emitted here: pruning and re-encoding
 * happen in the engine-side toolkit after loading.
 */
import {
  DspConfig, DenseLayerData, LstmLayerData, LSTM_BIAS_NAMES,
  LSTM_MATRIX_NAMES, ModelData, Tensor1D, Tensor2D, binsOf, validateModel,
} from "./model";
import { ByteWriter, crc32 } from "./writer";

const KIND_LSTM = 1;
const KIND_DENSE = 2;
const ENCODING_DENSE = 0;
const ACTIVATION = { none: 0, tanh: 1, sigmoid: 2 } as const;

function writeMatrix(w: ByteWriter, name: string, t: Tensor2D): void {
  w.name(name);
  w.u8(ENCODING_DENSE);
  w.u8(t.bits);
  w.u16(t.rows);
  w.u16(t.cols);
  w.codes(t.codes, t.bits);
}

function writeBias(w: ByteWriter, name: string, t: Tensor1D): void {
  w.name(name);
  w.u8(t.bits);
  w.u16(t.codes.length);
  w.codes(t.codes, t.bits);
}

function writeLstm(w: ByteWriter, name: string, layer: LstmLayerData): void {
  w.name(name);
  w.u8(KIND_LSTM);
  w.u8(ACTIVATION.none);
  w.u8(LSTM_MATRIX_NAMES.length);
  w.u8(LSTM_BIAS_NAMES.length);
  for (const m of LSTM_MATRIX_NAMES) writeMatrix(w, m, layer.matrices[m]);
  for (const b of LSTM_BIAS_NAMES) writeBias(w, b, layer.biases[b]);
}

function writeDense(w: ByteWriter, name: string, layer: DenseLayerData): void {
  w.name(name);
  w.u8(KIND_DENSE);
  w.u8(ACTIVATION[layer.activation]);
  w.u8(1);
  w.u8(1);
  writeMatrix(w, "w", layer.w);
  writeBias(w, "b", layer.b);
}

function writeFilterbank(w: ByteWriter, dsp: DspConfig, fb: Float64Array): void {
  const bins = binsOf(dsp);
  for (let band = 0; band < dsp.mel_bins; band++) {
    const row = fb.subarray(band * bins, (band + 1) * bins);
    let first = -1;
    let last = -1;
    for (let i = 0; i < bins; i++) {
      if (row[i] !== 0) {
        if (first < 0) first = i;
        last = i;
      }
    }
    if (first < 0) throw new Error(`filter ${band} has empty support`);
    w.u16(first);
    w.u16(last - first + 1);
    w.f64Array(row.subarray(first, last + 1));
  }
}

export function serializeModel(model: ModelData): Buffer {
  validateModel(model);
  const w = new ByteWriter();
  w.raw(Buffer.from("SSEM", "ascii"));
  w.u16(1); // version
  w.u16(0);
  const { dsp } = model;
  w.u32(dsp.sample_rate);
  w.u16(dsp.frame_size);
  w.u16(dsp.hop_size);
  w.u16(dsp.mel_bins);
  w.u16(binsOf(dsp));
  w.u8(0); // sqrt-Hann window
  w.u8(0);
  w.f64(dsp.power_exponent);
  w.f64Array(model.qeqGain);
  w.f64Array(model.qeqBias);
  writeFilterbank(w, dsp, model.filterbank);
  w.u8(4);
  writeLstm(w, "lstm1", model.lstm1);
  writeLstm(w, "lstm2", model.lstm2);
  writeDense(w, "dense1", model.dense1);
  writeDense(w, "dense2", model.dense2);
  const body = w.concat();
  const tail = Buffer.alloc(4);
  tail.writeUInt32LE(crc32(body));
  return Buffer.concat([body, tail]);
}
