/**
 * Symmetric fixed-point quantization, matching the engine's rounding
 * exactly: round half to even, then saturate. Shared golden vectors pin
 * the agreement across both codebases.
 */

export interface QuantFormat {
  bits: 8 | 16;
  fracBits: number;
  scale: number;
  qmin: number;
  qmax: number;
}

export const Q8: QuantFormat = { bits: 8, fracBits: 7, scale: 128, qmin: -128, qmax: 127 };
export const Q16: QuantFormat = { bits: 16, fracBits: 15, scale: 32768, qmin: -32768, qmax: 32767 };

/** Round to nearest, ties to even (Math.round rounds ties up instead). */
export function rint(v: number): number {
  const floor = Math.floor(v);
  const frac = v - floor;
  if (frac > 0.5) return floor + 1;
  if (frac < 0.5) return floor;
  return floor % 2 === 0 ? floor : floor + 1;
}

export function quantize(x: number, fmt: QuantFormat): number {
  if (Number.isNaN(x)) return 0;
  const scaled = rint(x * fmt.scale);
  return Math.min(Math.max(scaled, fmt.qmin), fmt.qmax);
}

export interface QuantizeResult {
  codes: Int16Array;
  saturated: number;
}

/** Quantize a whole tensor, counting values that hit the rails. */
export function quantizeArray(values: Float64Array | number[], fmt: QuantFormat): QuantizeResult {
  const codes = new Int16Array(values.length);
  let saturated = 0;
  for (let i = 0; i < values.length; i++) {
    const x = values[i];
    const code = quantize(x, fmt);
    if (!Number.isNaN(x) && (rint(x * fmt.scale) > fmt.qmax || rint(x * fmt.scale) < fmt.qmin)) {
      saturated += 1;
    }
    codes[i] = code;
  }
  return { codes, saturated };
}
