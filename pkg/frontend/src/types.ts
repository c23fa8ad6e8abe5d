/** Response shapes served by the explorer API. */

export interface CustodySegment {
  owner: string;
  start: number;
  end: number | null;
  open: boolean;
}

export interface EvidenceRecordDoc {
  id: string;
  creator: string;
  dsc: string;
  tm: number;
  own: string;
  own_prev: string;
  device_type: string;
  custody_times: CustodySegment[];
}

export interface EvidenceHandleDoc {
  record: EvidenceRecordDoc;
  erased: boolean;
  locator: string;
}

export interface TrailDoc {
  id: string;
  erased: boolean;
  trail: CustodySegment[];
}

export interface DeviceRecordDoc {
  device_id: string;
  firmware_hash: string;
  config_hash: string;
  registered_at: number;
  registrar: string;
}

export interface DeviceHistoryDoc {
  device_id: string;
  history: DeviceRecordDoc[];
}

export interface TxDoc {
  tx_id: string;
  kind: string;
  submitter: string;
  submitter_signature: string;
  proposal: Record<string, unknown>;
}

export interface TxLookupDoc {
  height: number;
  tx: TxDoc;
}

export interface BlockDoc {
  height: number;
  block_hash: string;
  prev_hash: string;
  timestamp: number;
  tx_merkle_root: string;
  proposer: string;
  proposer_signature: string;
  tx_list: TxDoc[];
}

export interface BlockCheckDoc {
  height: number;
  valid: boolean;
  reasons: string[];
}

export interface VerifyReportDoc {
  valid: boolean;
  height: number;
  first_invalid_height: number | null;
  blocks: BlockCheckDoc[];
}

export interface ApiError {
  code: string;
  detail: string;
}

export interface Session {
  token: string;
  address: string;
  role: string;
  expiresAt: number;
}

/** One row of the evidence table, derived from committed CREATE/TRANSFER/ERASE txs. */
export interface EvidenceRow {
  id: string;
  device_type: string;
  owner: string;
  erased: boolean;
}
