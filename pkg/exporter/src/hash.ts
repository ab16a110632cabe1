/**
 * Weight digest shared with the engine: SHA-256 over decoded weights in
 * canonical order, values widened to i16 LE (see docs/container-format.md).
 */
import { createHash } from "crypto";

import {
  LSTM_BIAS_NAMES, LSTM_MATRIX_NAMES, ModelData, Tensor1D, Tensor2D,
} from "./model";

function i16le(codes: Int16Array): Buffer {
  const b = Buffer.alloc(2 * codes.length);
  for (let i = 0; i < codes.length; i++) b.writeInt16LE(codes[i], 2 * i);
  return b;
}

export function weightHash(model: ModelData): string {
  const h = createHash("sha256");
  h.update(Buffer.from("MMWH1", "ascii"));

  const tensor = (name: string, rows: number, cols: number, bits: number, codes: Int16Array) => {
    h.update(Buffer.from(name, "utf-8"));
    h.update(Buffer.from([0]));
    const meta = Buffer.alloc(9);
    meta.writeUInt32LE(rows, 0);
    meta.writeUInt32LE(cols, 4);
    meta.writeUInt8(bits, 8);
    h.update(meta);
    h.update(i16le(codes));
  };

  const mat = (name: string, t: Tensor2D) => tensor(name, t.rows, t.cols, t.bits, t.codes);
  const bias = (name: string, t: Tensor1D) => tensor(name, 1, t.codes.length, t.bits, t.codes);

  for (const [lname, layer] of [["lstm1", model.lstm1], ["lstm2", model.lstm2]] as const) {
    for (const m of LSTM_MATRIX_NAMES) mat(`${lname}.${m}`, layer.matrices[m]);
    for (const b of LSTM_BIAS_NAMES) bias(`${lname}.${b}`, layer.biases[b]);
  }
  for (const [lname, layer] of [["dense1", model.dense1], ["dense2", model.dense2]] as const) {
    mat(`${lname}.w`, layer.w);
    bias(`${lname}.b`, layer.b);
  }
  return h.digest("hex");
}
