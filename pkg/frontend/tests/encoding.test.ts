import { describe, expect, it } from "vitest";

import {
  Reader,
  concat,
  fromB64,
  fromHex,
  loadBinaryOrB64,
  packBytes,
  packList,
  packStr,
  packU64,
  toB64,
  toHex,
} from "../src/encoding.js";
import { evidenceRecordBytes, signingBytes } from "../src/tx.js";
import { RECORD, RECORD_BYTES_HEX, TX_SIGNING_BYTES_HEX } from "./vectors.js";

describe("canonical encoding", () => {
  it("length-prefixes fields big-endian", () => {
    expect(toHex(packBytes(new Uint8Array([0xab, 0xcd])))) .toBe("00000002abcd");
    expect(toHex(packU64(1750000100))).toBe("0000000800000000684ee1e4");
    expect(toHex(packStr("camera"))).toBe("00000006" + toHex(new TextEncoder().encode("camera")));
  });

  it("encodes lists as count plus nested fields", () => {
    const packed = packList([new Uint8Array([1]), new Uint8Array([2, 3])]);
    expect(toHex(packed)).toBe("0000000f" + "00000002" + "0000000101" + "0000000202" + "03");
  });

  it("round-trips through the reader", () => {
    const data = concat(packBytes(new Uint8Array([9, 9])), packU64(7), packStr("héllo"));
    const r = new Reader(data);
    expect(toHex(r.bytes())).toBe("0909");
    expect(r.u64()).toBe(7n);
    expect(r.str()).toBe("héllo");
  });

  it("base64 helpers round-trip binary", () => {
    const raw = fromHex("00ff10a7");
    expect(toHex(fromB64(toB64(raw)))).toBe("00ff10a7");
    expect(toHex(loadBinaryOrB64(new TextEncoder().encode(toB64(raw))))).toBe("00ff10a7");
    expect(toHex(loadBinaryOrB64(raw))).toBe("00ff10a7");
  });

  it("serializes an evidence record to the ledger's exact bytes", () => {
    expect(toHex(evidenceRecordBytes(RECORD))).toBe(RECORD_BYTES_HEX);
  });

  it("builds the exact signing bytes for a transfer", () => {
    expect(toHex(signingBytes("TRANSFER", evidenceRecordBytes(RECORD)))).toBe(TX_SIGNING_BYTES_HEX);
  });
});
