/**
 * The manifest maps framework parameter names to container slots, with
 * optional row/column slicing (for packed LSTM weights) and transposition
 * (for frameworks that store input-major matrices).
 */
import { Checkpoint } from "./safetensors";

export interface SlotRef {
  tensor: string;
  /** half-open row range into the stored tensor, before transpose */
  rows?: [number, number];
  cols?: [number, number];
  transpose?: boolean;
}

export interface Manifest {
  slots: Record<string, SlotRef>;
}

export const WEIGHT_SLOTS = [
  "lstm1.w_xi", "lstm1.w_hi", "lstm1.w_xf", "lstm1.w_hf",
  "lstm1.w_xo", "lstm1.w_ho", "lstm1.w_xc", "lstm1.w_hc",
  "lstm2.w_xi", "lstm2.w_hi", "lstm2.w_xf", "lstm2.w_hf",
  "lstm2.w_xo", "lstm2.w_ho", "lstm2.w_xc", "lstm2.w_hc",
  "dense1.w", "dense2.w",
];
export const BIAS_SLOTS = [
  "lstm1.b_i", "lstm1.b_f", "lstm1.b_o", "lstm1.b_u",
  "lstm2.b_i", "lstm2.b_f", "lstm2.b_o", "lstm2.b_u",
  "dense1.b", "dense2.b",
];
export const DSP_SLOTS = ["qeq.gain", "qeq.bias", "filterbank"];
export const ALL_SLOTS = [...WEIGHT_SLOTS, ...BIAS_SLOTS, ...DSP_SLOTS];

export interface ResolvedTensor {
  rows: number;
  cols: number;
  /** row-major */
  data: Float64Array;
}

export class ManifestError extends Error {}

export function parseManifest(json: unknown): Manifest {
  if (typeof json !== "object" || json === null || !("slots" in json)) {
    throw new ManifestError("manifest must be an object with a 'slots' table");
  }
  const slots = (json as { slots: Record<string, SlotRef> }).slots;
  const missing = ALL_SLOTS.filter((s) => !(s in slots));
  if (missing.length) throw new ManifestError(`manifest is missing slots: ${missing.join(", ")}`);
  const unknown = Object.keys(slots).filter((s) => !ALL_SLOTS.includes(s));
  if (unknown.length) throw new ManifestError(`manifest names unknown slots: ${unknown.join(", ")}`);
  return { slots };
}

/** Pull one slot's matrix out of the checkpoint, slicing and transposing. */
export function resolveSlot(ckpt: Checkpoint, slot: string, ref: SlotRef): ResolvedTensor {
  const t = ckpt.get(ref.tensor);
  if (!t) throw new ManifestError(`${slot}: checkpoint has no tensor '${ref.tensor}'`);
  if (t.shape.length > 2) throw new ManifestError(`${slot}: tensor rank ${t.shape.length} > 2`);
  const rows = t.shape.length === 2 ? t.shape[0] : 1;
  const cols = t.shape.length === 2 ? t.shape[1] : t.shape[0];
  const [r0, r1] = ref.rows ?? [0, rows];
  const [c0, c1] = ref.cols ?? [0, cols];
  if (!(0 <= r0 && r0 < r1 && r1 <= rows) || !(0 <= c0 && c0 < c1 && c1 <= cols)) {
    throw new ManifestError(`${slot}: slice [${r0},${r1})x[${c0},${c1}) outside ${rows}x${cols}`);
  }
  let outRows = r1 - r0;
  let outCols = c1 - c0;
  let data = new Float64Array(outRows * outCols);
  for (let r = 0; r < outRows; r++) {
    for (let c = 0; c < outCols; c++) {
      data[r * outCols + c] = t.data[(r0 + r) * cols + (c0 + c)];
    }
  }
  if (ref.transpose) {
    const swapped = new Float64Array(outRows * outCols);
    for (let r = 0; r < outRows; r++) {
      for (let c = 0; c < outCols; c++) {
        swapped[c * outRows + r] = data[r * outCols + c];
      }
    }
    data = swapped;
    [outRows, outCols] = [outCols, outRows];
  }
  return { rows: outRows, cols: outCols, data };
}
