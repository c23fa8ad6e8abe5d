/**
 * Canonical length-prefixed serialization, byte-compatible with the ledger:
 * every field is a 4-byte big-endian length followed by the payload;
 * integers are 8-byte big-endian inside a length-prefixed field; lists are
 * a count followed by length-prefixed elements, nested as one field.
 */

export function packBytes(value: Uint8Array): Uint8Array {
  const out = new Uint8Array(4 + value.length);
  new DataView(out.buffer).setUint32(0, value.length, false);
  out.set(value, 4);
  return out;
}

export function packU64(value: number | bigint): Uint8Array {
  const buf = new Uint8Array(8);
  new DataView(buf.buffer).setBigUint64(0, BigInt(value), false);
  return packBytes(buf);
}

export function packStr(value: string): Uint8Array {
  return packBytes(new TextEncoder().encode(value));
}

export function concat(...parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let pos = 0;
  for (const p of parts) {
    out.set(p, pos);
    pos += p.length;
  }
  return out;
}

export function packList(items: Uint8Array[]): Uint8Array {
  const count = new Uint8Array(4);
  new DataView(count.buffer).setUint32(0, items.length, false);
  return packBytes(concat(count, ...items.map(packBytes)));
}

export function fromHex(hex: string): Uint8Array {
  if (hex.length % 2 !== 0 || /[^0-9a-fA-F]/.test(hex)) {
    throw new Error(`invalid hex: ${hex.slice(0, 32)}`);
  }
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(2 * i, 2 * i + 2), 16);
  }
  return out;
}

export function toHex(data: Uint8Array): string {
  return Array.from(data, (b) => b.toString(16).padStart(2, "0")).join("");
}

export function toB64(data: Uint8Array): string {
  let bin = "";
  for (const b of data) bin += String.fromCharCode(b);
  return btoa(bin);
}

export function fromB64(text: string): Uint8Array {
  const bin = atob(text.trim());
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

/** Sequential reader for canonical bytes (used to parse certificate files). */
export class Reader {
  private pos = 0;
  constructor(private data: Uint8Array) {}

  bytes(): Uint8Array {
    const view = new DataView(this.data.buffer, this.data.byteOffset, this.data.byteLength);
    if (this.pos + 4 > this.data.length) throw new Error("truncated length prefix");
    const n = view.getUint32(this.pos, false);
    this.pos += 4;
    if (this.pos + n > this.data.length) throw new Error("truncated field");
    const out = this.data.slice(this.pos, this.pos + n);
    this.pos += n;
    return out;
  }

  u64(): bigint {
    const raw = this.bytes();
    if (raw.length !== 8) throw new Error("u64 field must be 8 bytes");
    return new DataView(raw.buffer, raw.byteOffset, 8).getBigUint64(0, false);
  }

  str(): string {
    return new TextDecoder().decode(this.bytes());
  }
}

/**
 * Key/cert files may hold raw canonical bytes or their base64 text; mirror
 * the loader used by the node tooling.
 */
export function loadBinaryOrB64(raw: Uint8Array): Uint8Array {
  const text = new TextDecoder().decode(raw).trim();
  if (text.length > 0 && /^[A-Za-z0-9+/=\s]+$/.test(text)) {
    try {
      return fromB64(text);
    } catch {
      /* fall through to raw */
    }
  }
  return raw;
}
