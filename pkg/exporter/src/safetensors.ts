/**
 * Minimal safetensors reader/writer: 8-byte little-endian header length,
 * JSON header mapping tensor names to dtype/shape/offsets, then raw data.
 * Only F32 and F64 tensors are supported; everything becomes Float64Array.
 */

export interface CheckpointTensor {
  shape: number[];
  data: Float64Array;
}

export type Checkpoint = Map<string, CheckpointTensor>;

interface HeaderEntry {
  dtype: string;
  shape: number[];
  data_offsets: [number, number];
}

export function readSafetensors(buf: Buffer): Checkpoint {
  if (buf.length < 8) throw new Error("checkpoint too short");
  const headerLen = Number(buf.readBigUInt64LE(0));
  if (8 + headerLen > buf.length) throw new Error("checkpoint header overruns the file");
  const header = JSON.parse(buf.subarray(8, 8 + headerLen).toString("utf-8")) as
    Record<string, HeaderEntry>;
  const body = buf.subarray(8 + headerLen);
  const out: Checkpoint = new Map();
  for (const [name, entry] of Object.entries(header)) {
    if (name === "__metadata__") continue;
    const [lo, hi] = entry.data_offsets;
    const raw = body.subarray(lo, hi);
    const count = entry.shape.reduce((a, b) => a * b, 1);
    const data = new Float64Array(count);
    if (entry.dtype === "F32") {
      if (raw.length !== 4 * count) throw new Error(`${name}: size mismatch`);
      for (let i = 0; i < count; i++) data[i] = raw.readFloatLE(4 * i);
    } else if (entry.dtype === "F64") {
      if (raw.length !== 8 * count) throw new Error(`${name}: size mismatch`);
      for (let i = 0; i < count; i++) data[i] = raw.readDoubleLE(8 * i);
    } else {
      throw new Error(`${name}: unsupported dtype ${entry.dtype}`);
    }
    out.set(name, { shape: entry.shape, data });
  }
  return out;
}

export function writeSafetensors(tensors: Map<string, CheckpointTensor>): Buffer {
  const header: Record<string, HeaderEntry> = {};
  const blobs: Buffer[] = [];
  let offset = 0;
  for (const [name, t] of tensors) {
    const blob = Buffer.alloc(4 * t.data.length);
    for (let i = 0; i < t.data.length; i++) blob.writeFloatLE(Math.fround(t.data[i]), 4 * i);
    header[name] = { dtype: "F32", shape: t.shape, data_offsets: [offset, offset + blob.length] };
    blobs.push(blob);
    offset += blob.length;
  }
  const headerBuf = Buffer.from(JSON.stringify(header), "utf-8");
  const lenBuf = Buffer.alloc(8);
  lenBuf.writeBigUInt64LE(BigInt(headerBuf.length));
  return Buffer.concat([lenBuf, headerBuf, ...blobs]);
}
