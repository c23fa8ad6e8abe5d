/**
 * Pure view functions: API response documents in, HTML strings out.
 * No fetching, no state, no fabrication of ledger fields; everything
 * rendered comes from the documents, which keeps these snapshot-testable.
 */

import {
  BlockDoc,
  CustodySegment,
  DeviceHistoryDoc,
  EvidenceHandleDoc,
  EvidenceRow,
  Session,
  TrailDoc,
  TxDoc,
  TxLookupDoc,
  VerifyReportDoc,
} from "./types.js";

export function esc(value: unknown): string {
  return String(value)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function shortHex(hex: string, keep = 12): string {
  return hex.length <= keep ? hex : `${hex.slice(0, keep)}…`;
}

export function utc(seconds: number): string {
  return new Date(seconds * 1000).toISOString().replace(".000Z", "Z");
}

function link(href: string, label: string): string {
  return `<a href="#/${href}">${esc(label)}</a>`;
}

export function renderChainSummary(latest: BlockDoc): string {
  return [
    `<div class="summary">`,
    `<span class="stat"><b>height</b> ${latest.height}</span>`,
    `<span class="stat"><b>last block</b> <code>${esc(shortHex(latest.block_hash, 16))}</code></span>`,
    `<span class="stat"><b>at</b> ${esc(utc(latest.timestamp))}</span>`,
    `</div>`,
  ].join("");
}

export function renderBlockList(blocks: BlockDoc[]): string {
  const rows = blocks
    .map(
      (b) =>
        `<tr><td>${link(`block/${b.height}`, String(b.height))}</td>` +
        `<td>${esc(utc(b.timestamp))}</td>` +
        `<td>${b.tx_list.length}</td>` +
        `<td><code>${esc(shortHex(b.block_hash, 16))}</code></td></tr>`,
    )
    .join("");
  return (
    `<table class="list"><thead><tr><th>height</th><th>time</th><th>txs</th><th>hash</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

function txRow(tx: TxDoc): string {
  const target =
    "id" in tx.proposal && tx.proposal.id
      ? link(`evidence/${tx.proposal.id}`, shortHex(String(tx.proposal.id)))
      : "device_id" in tx.proposal
        ? link(`device/${tx.proposal.device_id}`, String(tx.proposal.device_id))
        : "—";
  return (
    `<tr><td>${link(`tx/${tx.tx_id}`, shortHex(tx.tx_id))}</td>` +
    `<td><span class="kind kind-${esc(tx.kind.toLowerCase())}">${esc(tx.kind)}</span></td>` +
    `<td>${target}</td>` +
    `<td><code>${esc(shortHex(tx.submitter))}</code></td></tr>`
  );
}

export function renderBlockDetail(block: BlockDoc): string {
  return [
    `<h2>Block ${block.height}</h2>`,
    `<dl class="fields">`,
    `<dt>hash</dt><dd><code>${esc(block.block_hash)}</code></dd>`,
    `<dt>previous</dt><dd><code>${esc(block.prev_hash)}</code></dd>`,
    `<dt>time</dt><dd>${esc(utc(block.timestamp))}</dd>`,
    `<dt>merkle root</dt><dd><code>${esc(block.tx_merkle_root)}</code></dd>`,
    `<dt>proposer</dt><dd><code>${esc(block.proposer)}</code></dd>`,
    `</dl>`,
    `<h3>${block.tx_list.length} transaction(s)</h3>`,
    `<table class="list"><thead><tr><th>tx</th><th>kind</th><th>subject</th><th>submitter</th></tr></thead>`,
    `<tbody>${block.tx_list.map(txRow).join("")}</tbody></table>`,
  ].join("");
}

export function renderTxDetail(doc: TxLookupDoc): string {
  const fields = Object.entries(doc.tx.proposal)
    .map(([k, v]) => {
      const rendered =
        typeof v === "object" && v !== null ? `<pre>${esc(JSON.stringify(v, null, 1))}</pre>` : `<code>${esc(v)}</code>`;
      return `<dt>${esc(k)}</dt><dd>${rendered}</dd>`;
    })
    .join("");
  return [
    `<h2>Transaction <code>${esc(shortHex(doc.tx.tx_id, 20))}</code></h2>`,
    `<dl class="fields">`,
    `<dt>kind</dt><dd><span class="kind kind-${esc(doc.tx.kind.toLowerCase())}">${esc(doc.tx.kind)}</span></dd>`,
    `<dt>block</dt><dd>${link(`block/${doc.height}`, String(doc.height))}</dd>`,
    `<dt>submitter</dt><dd><code>${esc(doc.tx.submitter)}</code></dd>`,
    fields,
    `</dl>`,
  ].join("");
}

export function renderCustodyTimeline(trail: CustodySegment[]): string {
  if (trail.length === 0) return `<p class="muted">no custody intervals yet</p>`;
  const segments = trail
    .map((seg) => {
      const end = seg.open ? `<b class="open">OPEN</b>` : esc(utc(seg.end as number));
      return (
        `<li class="${seg.open ? "segment open" : "segment"}">` +
        `<code>${esc(seg.owner)}</code><br>` +
        `${esc(utc(seg.start))} → ${end}</li>`
      );
    })
    .join("");
  return `<ol class="timeline">${segments}</ol>`;
}

export function renderEvidenceDetail(handle: EvidenceHandleDoc, trail: TrailDoc, session: Session | null): string {
  const r = handle.record;
  const badge = handle.erased ? `<span class="badge erased">ERASED</span>` : `<span class="badge live">ACTIVE</span>`;
  const canErase = session !== null && session.role === "ISP" && session.address === r.creator && !handle.erased;
  const canTransfer = session !== null && session.address === r.own && !handle.erased;
  return [
    `<h2>Evidence <code>${esc(shortHex(r.id, 20))}</code> ${badge}</h2>`,
    `<dl class="fields">`,
    `<dt>id</dt><dd><code>${esc(r.id)}</code></dd>`,
    `<dt>device type</dt><dd>${esc(r.device_type)}</dd>`,
    `<dt>incident time</dt><dd>${esc(utc(r.tm))}</dd>`,
    `<dt>description</dt><dd class="dsc">${esc(r.dsc)}</dd>`,
    `<dt>creator (ISP)</dt><dd><code>${esc(r.creator)}</code></dd>`,
    `<dt>owner</dt><dd><code>${esc(r.own)}</code></dd>`,
    `<dt>previous owner</dt><dd><code>${esc(r.own_prev)}</code></dd>`,
    `<dt>payload</dt><dd>${handle.erased ? `<span class="muted">destroyed</span>` : `<code>${esc(handle.locator)}</code>`}</dd>`,
    `</dl>`,
    `<h3>Chain of custody</h3>`,
    renderCustodyTimeline(trail.trail),
    `<div class="actions">`,
    canTransfer ? `<button data-action="transfer" data-id="${esc(r.id)}">Transfer ownership</button>` : "",
    canErase ? `<button data-action="erase" data-id="${esc(r.id)}" class="danger">Erase payload</button>` : "",
    `</div>`,
  ].join("");
}

export function renderEvidenceTable(rows: EvidenceRow[]): string {
  if (rows.length === 0) return `<p class="muted">no evidence on chain</p>`;
  const body = rows
    .map(
      (row) =>
        `<tr class="${row.erased ? "erased" : ""}">` +
        `<td>${link(`evidence/${row.id}`, shortHex(row.id, 16))}</td>` +
        `<td>${esc(row.device_type)}</td>` +
        `<td><code>${esc(shortHex(row.owner))}</code></td>` +
        `<td>${row.erased ? "yes" : "no"}</td></tr>`,
    )
    .join("");
  return (
    `<table class="list"><thead><tr><th>id</th><th>type</th><th>owner</th><th>erased</th></tr></thead>` +
    `<tbody>${body}</tbody></table>`
  );
}

export function renderDeviceHistory(doc: DeviceHistoryDoc): string {
  const rows = doc.history
    .map(
      (rec) =>
        `<tr><td>${esc(utc(rec.registered_at))}</td>` +
        `<td><code>${esc(shortHex(rec.firmware_hash, 16))}</code></td>` +
        `<td><code>${esc(shortHex(rec.config_hash, 16))}</code></td>` +
        `<td><code>${esc(shortHex(rec.registrar))}</code></td></tr>`,
    )
    .join("");
  return [
    `<h2>Device <code>${esc(doc.device_id)}</code></h2>`,
    `<p>${doc.history.length} registered state(s); latest is the reference for verification.</p>`,
    `<table class="list"><thead><tr><th>registered</th><th>firmware</th><th>config</th><th>registrar</th></tr></thead>`,
    `<tbody>${rows}</tbody></table>`,
  ].join("");
}

export function renderVerifyReport(report: VerifyReportDoc): string {
  if (report.valid) {
    return `<div class="banner ok">Chain valid: ${report.height} block(s) verified.</div>`;
  }
  const failing = report.blocks.filter((b) => !b.valid);
  const reasons = failing
    .map((b) => `<li>height ${b.height}: ${b.reasons.map(esc).join("; ")}</li>`)
    .join("");
  return (
    `<div class="banner bad">Chain INVALID at height ${report.first_invalid_height}.</div>` +
    `<ul class="reasons">${reasons}</ul>`
  );
}

export type InvokePhase = "signing" | "submitted" | "committed" | "error";

export function renderInvokeStatus(phase: InvokePhase, detail: string): string {
  const labels: Record<InvokePhase, string> = {
    signing: "signing locally",
    submitted: "submitted, waiting for commit",
    committed: "committed",
    error: "failed",
  };
  return `<div class="invoke invoke-${phase}"><b>${labels[phase]}</b> ${esc(detail)}</div>`;
}

export function renderError(code: string, detail: string): string {
  return `<div class="banner bad"><b>${esc(code)}</b> ${esc(detail)}</div>`;
}

export function renderSessionBar(session: Session | null): string {
  if (!session) return `<span class="muted">no session; import a key and certificate to sign in</span>`;
  return (
    `<span class="role role-${esc(session.role.toLowerCase())}">${esc(session.role)}</span> ` +
    `<code>${esc(shortHex(session.address, 16))}</code>`
  );
}
