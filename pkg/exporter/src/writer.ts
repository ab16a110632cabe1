/** Little-endian byte assembly plus the IEEE CRC-32 used by the container. */

export class ByteWriter {
  private chunks: Buffer[] = [];

  raw(buf: Buffer): void {
    this.chunks.push(buf);
  }

  u8(v: number): void {
    const b = Buffer.alloc(1);
    b.writeUInt8(v);
    this.raw(b);
  }

  u16(v: number): void {
    const b = Buffer.alloc(2);
    b.writeUInt16LE(v);
    this.raw(b);
  }

  u32(v: number): void {
    const b = Buffer.alloc(4);
    b.writeUInt32LE(v >>> 0);
    this.raw(b);
  }

  f64(v: number): void {
    const b = Buffer.alloc(8);
    b.writeDoubleLE(v);
    this.raw(b);
  }

  f64Array(vs: ArrayLike<number>): void {
    const b = Buffer.alloc(8 * vs.length);
    for (let i = 0; i < vs.length; i++) b.writeDoubleLE(vs[i], 8 * i);
    this.raw(b);
  }

  name(s: string): void {
    const b = Buffer.from(s, "utf-8");
    this.u8(b.length);
    this.raw(b);
  }

  /** Integer codes at the given width; values must already be in range. */
  codes(vs: Int16Array | Int8Array | number[], bits: 8 | 16): void {
    if (bits === 8) {
      const b = Buffer.alloc(vs.length);
      for (let i = 0; i < vs.length; i++) b.writeInt8(vs[i], i);
      this.raw(b);
    } else {
      const b = Buffer.alloc(2 * vs.length);
      for (let i = 0; i < vs.length; i++) b.writeInt16LE(vs[i], 2 * i);
      this.raw(b);
    }
  }

  concat(): Buffer {
    return Buffer.concat(this.chunks);
  }
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(buf: Buffer): number {
  let crc = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    crc = CRC_TABLE[(crc ^ buf[i]) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}
