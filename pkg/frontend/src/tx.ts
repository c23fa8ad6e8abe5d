/**
 * Build and sign ledger transactions in the browser.
 *
 * Proposals are serialized to the ledger's canonical byte layout from API
 * response JSON; transfer and erase proposals carry the current custody
 * intervals exactly as served (a stale view is rejected by the chaincode).
 * The signature covers (kind, proposal); the full transaction appends the
 * submitter address and signature.
 */

import {
  concat,
  fromHex,
  packBytes,
  packList,
  packStr,
  packU64,
  toB64,
} from "./encoding.js";
import { ImportedKey, sha256, sign, verify } from "./sign.js";
import { CustodySegment, EvidenceRecordDoc } from "./types.js";

export type TxKind =
  | "CREATE"
  | "TRANSFER"
  | "ERASE"
  | "ACCESS"
  | "DEVICE_REGISTER"
  | "DEVICE_VERIFY";

function custodyBytes(segment: CustodySegment): Uint8Array {
  return concat(
    packBytes(fromHex(segment.owner)),
    packU64(segment.start),
    packU64(segment.end === null ? 0 : 1),
    packU64(segment.end ?? 0),
  );
}

export function evidenceRecordBytes(record: EvidenceRecordDoc): Uint8Array {
  return concat(
    packBytes(fromHex(record.id)),
    packBytes(fromHex(record.creator)),
    packStr(record.dsc),
    packU64(record.tm),
    packBytes(fromHex(record.own)),
    packBytes(fromHex(record.own_prev)),
    packStr(record.device_type),
    packList(record.custody_times.map(custodyBytes)),
  );
}

export function deviceRecordBytes(doc: {
  device_id: string;
  firmware_hash: string;
  config_hash: string;
  registered_at: number;
  registrar: string;
}): Uint8Array {
  return concat(
    packStr(doc.device_id),
    packBytes(fromHex(doc.firmware_hash)),
    packBytes(fromHex(doc.config_hash)),
    packU64(doc.registered_at),
    packBytes(fromHex(doc.registrar)),
  );
}

export interface SignedTx {
  kind: TxKind;
  bytes: Uint8Array;
  txB64: string;
  txIdHex: string;
}

export function signingBytes(kind: TxKind, proposal: Uint8Array): Uint8Array {
  return concat(packStr(kind), packBytes(proposal));
}

export async function signTransaction(
  kind: TxKind,
  proposal: Uint8Array,
  submitterHex: string,
  key: ImportedKey,
): Promise<SignedTx> {
  const message = signingBytes(kind, proposal);
  const signature = await sign(key, message);
  // Flag a bad signature before anything leaves the browser.
  if (!(await verify(key.publicRaw, message, signature))) {
    throw new Error("local signature self-check failed; refusing to submit");
  }
  const bytes = concat(message, packBytes(fromHex(submitterHex)), packBytes(signature));
  const txId = await sha256(bytes);
  return {
    kind,
    bytes,
    txB64: toB64(bytes),
    txIdHex: Array.from(txId, (b) => b.toString(16).padStart(2, "0")).join(""),
  };
}

/** CREATE: the submitter is creator, first owner and previous owner. */
export async function buildCreate(
  key: ImportedKey,
  submitterHex: string,
  idHex: string,
  dsc: string,
  tm: number,
  deviceType: string,
): Promise<SignedTx> {
  const record: EvidenceRecordDoc = {
    id: idHex,
    creator: submitterHex,
    dsc,
    tm,
    own: submitterHex,
    own_prev: submitterHex,
    device_type: deviceType,
    custody_times: [],
  };
  return signTransaction("CREATE", evidenceRecordBytes(record), submitterHex, key);
}

/** TRANSFER: current record as served, new owner in, submitter as previous owner. */
export async function buildTransfer(
  key: ImportedKey,
  submitterHex: string,
  current: EvidenceRecordDoc,
  newOwnerHex: string,
  dscAmendment = "",
): Promise<SignedTx> {
  const record: EvidenceRecordDoc = {
    ...current,
    dsc: dscAmendment ? dscAmendment : current.dsc,
    own: newOwnerHex,
    own_prev: submitterHex,
  };
  return signTransaction("TRANSFER", evidenceRecordBytes(record), submitterHex, key);
}

/** ERASE: the record exactly as served (creator-only; chain keeps the metadata). */
export async function buildErase(
  key: ImportedKey,
  submitterHex: string,
  current: EvidenceRecordDoc,
): Promise<SignedTx> {
  return signTransaction("ERASE", evidenceRecordBytes(current), submitterHex, key);
}

export async function buildDeviceRegister(
  key: ImportedKey,
  submitterHex: string,
  deviceId: string,
  firmwareHex: string,
  configHex: string,
): Promise<SignedTx> {
  const bytes = deviceRecordBytes({
    device_id: deviceId,
    firmware_hash: firmwareHex,
    config_hash: configHex,
    registered_at: 0,
    registrar: submitterHex,
  });
  return signTransaction("DEVICE_REGISTER", bytes, submitterHex, key);
}
