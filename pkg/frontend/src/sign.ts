/**
 * Client-side Ed25519 via WebCrypto. The signing key never leaves the
 * browser (or test process): it is imported from the operator's key file
 * and used to sign login challenges and transaction proposals locally.
 */

import { Reader, concat, fromHex, loadBinaryOrB64, toHex } from "./encoding.js";

const PKCS8_PREFIX = fromHex("302e020100300506032b657004220420");
const SPKI_PREFIX = fromHex("302a300506032b6570032100");

function subtle(): SubtleCrypto {
  const s = globalThis.crypto?.subtle;
  if (!s) throw new Error("WebCrypto unavailable; the explorer needs a secure context");
  return s;
}

export interface ImportedKey {
  privateKey: CryptoKey;
  publicKey: CryptoKey;
  publicRaw: Uint8Array;
}

/** Import a raw 32-byte Ed25519 seed (the node's .key file format). */
export async function importSigningKey(seed: Uint8Array): Promise<ImportedKey> {
  if (seed.length !== 32) throw new Error(`signing key must be 32 bytes, got ${seed.length}`);
  const pkcs8 = concat(PKCS8_PREFIX, seed);
  const privateKey = await subtle().importKey("pkcs8", pkcs8 as BufferSource, { name: "Ed25519" }, true, ["sign"]);
  const jwk = await subtle().exportKey("jwk", privateKey);
  if (!jwk.x) throw new Error("cannot derive the public key from the imported key");
  const publicRaw = b64urlToBytes(jwk.x);
  const publicKey = await importVerifyKey(publicRaw);
  return { privateKey, publicKey, publicRaw };
}

export async function importVerifyKey(publicRaw: Uint8Array): Promise<CryptoKey> {
  const spki = concat(SPKI_PREFIX, publicRaw);
  return subtle().importKey("spki", spki as BufferSource, { name: "Ed25519" }, true, ["verify"]);
}

export async function sign(key: ImportedKey, message: Uint8Array): Promise<Uint8Array> {
  const sig = await subtle().sign({ name: "Ed25519" }, key.privateKey, message as BufferSource);
  return new Uint8Array(sig);
}

export async function verify(publicRaw: Uint8Array, message: Uint8Array, signature: Uint8Array): Promise<boolean> {
  try {
    const key = await importVerifyKey(publicRaw);
    return await subtle().verify({ name: "Ed25519" }, key, signature as BufferSource, message as BufferSource);
  } catch {
    return false;
  }
}

export async function sha256(data: Uint8Array): Promise<Uint8Array> {
  return new Uint8Array(await subtle().digest("SHA-256", data as BufferSource));
}

/** address = first 20 bytes of the hash of the raw public key. */
export async function addressFromPublicKey(publicRaw: Uint8Array): Promise<Uint8Array> {
  return (await sha256(publicRaw)).slice(0, 20);
}

function b64urlToBytes(b64url: string): Uint8Array {
  const b64 = b64url.replace(/-/g, "+").replace(/_/g, "/");
  const padded = b64 + "=".repeat((4 - (b64.length % 4)) % 4);
  const bin = atob(padded);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

export interface CertificateInfo {
  address: string;
  role: string;
  publicKey: Uint8Array;
  issuedAt: number;
  expiresAt: number;
}

/** Parse a certificate file (canonical bytes or base64 text). */
export function parseCertificate(raw: Uint8Array): CertificateInfo {
  const r = new Reader(loadBinaryOrB64(raw));
  const address = toHex(r.bytes());
  const role = r.str();
  const publicKey = r.bytes();
  const issuedAt = Number(r.u64());
  const expiresAt = Number(r.u64());
  return { address, role, publicKey, issuedAt, expiresAt };
}
