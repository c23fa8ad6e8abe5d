/**
 * Thin client for the explorer API. Configuration is the API base URL; the
 * session token is the only state. Login is challenge-response: the server
 * nonce is signed locally with the operator's imported key.
 */

import { fromHex, toB64 } from "./encoding.js";
import { ImportedKey, sign } from "./sign.js";
import {
  ApiError,
  BlockDoc,
  DeviceHistoryDoc,
  EvidenceHandleDoc,
  Session,
  TrailDoc,
  TxLookupDoc,
  VerifyReportDoc,
} from "./types.js";

export class ApiRequestError extends Error {
  constructor(
    public status: number,
    public code: string,
    public detail: string,
  ) {
    super(`${status} ${code}: ${detail}`);
  }
}

export class ApiClient {
  session: Session | null = null;

  constructor(public baseUrl: string) {}

  private headers(): Record<string, string> {
    const h: Record<string, string> = { "Content-Type": "application/json" };
    if (this.session) h["Authorization"] = `Bearer ${this.session.token}`;
    return h;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      let err: ApiError = { code: `HTTP_${resp.status}`, detail: resp.statusText };
      try {
        const parsed = await resp.json();
        if (parsed && parsed.code) err = parsed;
        else if (parsed && parsed.detail) err = { code: `HTTP_${resp.status}`, detail: String(parsed.detail) };
      } catch {
        /* non-JSON error body */
      }
      throw new ApiRequestError(resp.status, err.code, err.detail);
    }
    return (await resp.json()) as T;
  }

  async login(addressHex: string, key: ImportedKey, role = ""): Promise<Session> {
    const { challenge } = await this.request<{ challenge: string }>("POST", "/session/challenge", {
      address: addressHex,
    });
    const signature = toB64(await sign(key, fromHex(challenge)));
    const doc = await this.request<{ token: string; expires_at: number; role: string }>(
      "POST",
      "/session/login",
      { address: addressHex, challenge, signature },
    );
    this.session = {
      token: doc.token,
      address: addressHex,
      role: doc.role || role,
      expiresAt: doc.expires_at,
    };
    return this.session;
  }

  latestBlock(): Promise<BlockDoc> {
    return this.request("GET", "/blocks/latest");
  }

  block(height: number): Promise<BlockDoc> {
    return this.request("GET", `/blocks/${height}`);
  }

  tx(txIdHex: string): Promise<TxLookupDoc> {
    return this.request("GET", `/tx/${txIdHex}`);
  }

  evidence(idHex: string): Promise<EvidenceHandleDoc> {
    return this.request("GET", `/evidence/${idHex}`);
  }

  trail(idHex: string): Promise<TrailDoc> {
    return this.request("GET", `/evidence/${idHex}/trail`);
  }

  device(deviceId: string): Promise<DeviceHistoryDoc> {
    return this.request("GET", `/devices/${encodeURIComponent(deviceId)}`);
  }

  verifyChain(): Promise<VerifyReportDoc> {
    return this.request("GET", "/chain/verify");
  }

  invoke(op: string, txB64: string): Promise<{ tx_id: string; height: number }> {
    return this.request("POST", `/invoke/${op}`, { transaction: txB64 });
  }

  /** Poll /tx/{id} until the transaction is visible or attempts run out. */
  async pollCommitted(txIdHex: string, attempts = 10, intervalMs = 2000): Promise<TxLookupDoc> {
    let lastErr: unknown = null;
    for (let i = 0; i < attempts; i++) {
      try {
        return await this.tx(txIdHex);
      } catch (err) {
        lastErr = err;
        if (err instanceof ApiRequestError && err.status !== 404) throw err;
        await new Promise((r) => setTimeout(r, intervalMs));
      }
    }
    throw lastErr instanceof Error ? lastErr : new Error(`tx ${txIdHex} not committed`);
  }

  /**
   * Evidence table rows derived purely from committed transactions: walk the
   * chain, fold CREATE/TRANSFER/ERASE into (id, type, owner, erased).
   */
  async evidenceTable(): Promise<import("./types.js").EvidenceRow[]> {
    const latest = await this.latestBlock();
    const rows = new Map<string, import("./types.js").EvidenceRow>();
    for (let h = 0; h <= latest.height; h++) {
      const block = h === latest.height ? latest : await this.block(h);
      for (const tx of block.tx_list) {
        const p = tx.proposal as { id?: string; device_type?: string; own?: string };
        if (!p.id) continue;
        if (tx.kind === "CREATE") {
          rows.set(p.id, {
            id: p.id,
            device_type: p.device_type ?? "",
            owner: p.own ?? "",
            erased: false,
          });
        } else if (tx.kind === "TRANSFER") {
          const row = rows.get(p.id);
          if (row) row.owner = p.own ?? row.owner;
        } else if (tx.kind === "ERASE") {
          const row = rows.get(p.id);
          if (row) row.erased = true;
        }
      }
    }
    return [...rows.values()];
  }
}
