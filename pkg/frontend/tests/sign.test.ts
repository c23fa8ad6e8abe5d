import { describe, expect, it } from "vitest";

import { fromHex, toHex } from "../src/encoding.js";
import { addressFromPublicKey, importSigningKey, sign, verify } from "../src/sign.js";
import { evidenceRecordBytes, buildTransfer } from "../src/tx.js";
import {
  MESSAGE,
  PUBLIC_KEY_HEX,
  RECORD,
  SEED_HEX,
  SIGNATURE_HEX,
  TX_BYTES_HEX,
  TX_ID_HEX,
} from "./vectors.js";

describe("client-side signing", () => {
  it("derives the same public key as the ledger tooling", async () => {
    const key = await importSigningKey(fromHex(SEED_HEX));
    expect(toHex(key.publicRaw)).toBe(PUBLIC_KEY_HEX);
  });

  it("produces the ledger's deterministic Ed25519 signature", async () => {
    const key = await importSigningKey(fromHex(SEED_HEX));
    const sig = await sign(key, new TextEncoder().encode(MESSAGE));
    expect(toHex(sig)).toBe(SIGNATURE_HEX);
    expect(await verify(key.publicRaw, new TextEncoder().encode(MESSAGE), sig)).toBe(true);
    expect(await verify(key.publicRaw, new TextEncoder().encode(MESSAGE + "!"), sig)).toBe(false);
  });

  it("computes the 20-byte truncated-hash address", async () => {
    const key = await importSigningKey(fromHex(SEED_HEX));
    const address = await addressFromPublicKey(key.publicRaw);
    expect(address.length).toBe(20);
  });

  it("rejects keys of the wrong size", async () => {
    await expect(importSigningKey(new Uint8Array(16))).rejects.toThrow("32 bytes");
  });

  it("assembles a byte-identical signed transfer transaction", async () => {
    const key = await importSigningKey(fromHex(SEED_HEX));
    const tx = await buildTransfer(
      key,
      RECORD.own_prev,
      { ...RECORD, own: RECORD.own_prev, own_prev: "9".repeat(40) }, // pre-transfer view
      RECORD.own,
    );
    // buildTransfer rewrites own/own_prev; the record carried must match the vector
    expect(toHex(evidenceRecordBytes({ ...RECORD }))).toContain(RECORD.id);
    expect(toHex(tx.bytes)).toBe(TX_BYTES_HEX);
    expect(tx.txIdHex).toBe(TX_ID_HEX);
  });
});
