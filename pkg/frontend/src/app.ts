/**
 * Single-page wiring: hash routing, a 2-second polling loop that re-renders
 * the current view from fresh API responses, key/cert import, and the
 * invoke forms (signing happens in tx.ts before anything is sent).
 */

import { ApiClient, ApiRequestError } from "./api.js";
import { toHex } from "./encoding.js";
import { ImportedKey, addressFromPublicKey, importSigningKey, parseCertificate } from "./sign.js";
import { buildCreate, buildDeviceRegister, buildErase, buildTransfer } from "./tx.js";
import {
  renderBlockDetail,
  renderBlockList,
  renderChainSummary,
  renderDeviceHistory,
  renderError,
  renderEvidenceDetail,
  renderEvidenceTable,
  renderInvokeStatus,
  renderSessionBar,
  renderTxDetail,
  renderVerifyReport,
} from "./views.js";

const POLL_INTERVAL_MS = 2000;

interface AppState {
  api: ApiClient;
  key: ImportedKey | null;
  timer: number | null;
}

const state: AppState = {
  api: new ApiClient(localStorage.getItem("apiBase") ?? window.location.origin),
  key: null,
  timer: null,
};

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function setMain(html: string): void {
  el("main").innerHTML = html;
}

function setStatus(html: string): void {
  el("status").innerHTML = html;
}

async function renderRoute(): Promise<void> {
  const [route, arg] = window.location.hash.replace(/^#\//, "").split("/", 2) as [string, string?];
  el("session").innerHTML = renderSessionBar(state.api.session);
  if (!state.api.session) {
    setMain(`<p class="muted">Import your key and certificate, then sign in, to query the ledger.</p>`);
    return;
  }
  try {
    if (route === "" || route === "blocks") {
      const latest = await state.api.latestBlock();
      const from = Math.max(0, latest.height - 24);
      const blocks = [];
      for (let h = latest.height; h >= from; h--) {
        blocks.push(h === latest.height ? latest : await state.api.block(h));
      }
      setMain(renderChainSummary(latest) + renderBlockList(blocks));
    } else if (route === "block" && arg !== undefined) {
      setMain(renderBlockDetail(await state.api.block(Number(arg))));
    } else if (route === "tx" && arg) {
      setMain(renderTxDetail(await state.api.tx(arg)));
    } else if (route === "evidence" && arg) {
      const [handle, trail] = await Promise.all([state.api.evidence(arg), state.api.trail(arg)]);
      setMain(renderEvidenceDetail(handle, trail, state.api.session));
      wireEvidenceActions();
    } else if (route === "evidence-table") {
      setMain(`<h2>Evidence</h2>` + renderEvidenceTable(await state.api.evidenceTable()));
    } else if (route === "device" && arg) {
      setMain(renderDeviceHistory(await state.api.device(decodeURIComponent(arg))));
    } else if (route === "verify") {
      setMain(`<h2>Chain verification</h2>` + renderVerifyReport(await state.api.verifyChain()));
    } else if (route === "invoke") {
      renderInvokeForms();
    } else {
      setMain(renderError("NOT_FOUND", `unknown view ${route}`));
    }
  } catch (err) {
    if (err instanceof ApiRequestError) {
      setMain(renderError(err.code, err.detail));
    } else {
      setMain(renderError("ERROR", String(err)));
    }
  }
}

function schedulePolling(): void {
  if (state.timer !== null) window.clearInterval(state.timer);
  state.timer = window.setInterval(() => {
    void renderRoute();
  }, POLL_INTERVAL_MS);
}

// -- session ------------------------------------------------------------------

async function handleLogin(): Promise<void> {
  try {
    const keyFile = (el("key-file") as HTMLInputElement).files?.[0];
    const certFile = (el("cert-file") as HTMLInputElement).files?.[0];
    if (!keyFile || !certFile) throw new Error("select both a key file and a certificate file");
    const { loadBinaryOrB64 } = await import("./encoding.js");
    const seed = loadBinaryOrB64(new Uint8Array(await keyFile.arrayBuffer()));
    const cert = parseCertificate(new Uint8Array(await certFile.arrayBuffer()));
    const key = await importSigningKey(seed);
    const derived = toHex(await addressFromPublicKey(key.publicRaw));
    if (derived !== cert.address) {
      throw new Error("key does not match the certificate (address mismatch)");
    }
    state.api.baseUrl = (el("api-base") as HTMLInputElement).value.replace(/\/$/, "");
    localStorage.setItem("apiBase", state.api.baseUrl);
    await state.api.login(cert.address, key, cert.role);
    state.key = key;
    setStatus("");
    await renderRoute();
  } catch (err) {
    setStatus(renderError("LOGIN_FAILED", err instanceof ApiRequestError ? err.detail : String(err)));
  }
}

// -- invokes --------------------------------------------------------------------

function requireKey(): ImportedKey {
  if (!state.key || !state.api.session) throw new Error("sign in first");
  return state.key;
}

async function submitAndTrack(op: string, txB64: string, txIdHex: string): Promise<void> {
  setStatus(renderInvokeStatus("submitted", `tx ${txIdHex.slice(0, 16)}…`));
  await state.api.invoke(op, txB64);
  await state.api.pollCommitted(txIdHex, 10, POLL_INTERVAL_MS);
  setStatus(renderInvokeStatus("committed", `tx ${txIdHex.slice(0, 16)}…`));
  await renderRoute();
}

async function doTransfer(idHex: string): Promise<void> {
  try {
    const key = requireKey();
    const session = state.api.session!;
    const newOwner = window.prompt("Transfer to (hex address):")?.trim();
    if (!newOwner) return;
    const amendment = window.prompt("Description amendment (optional):") ?? "";
    setStatus(renderInvokeStatus("signing", `evidence ${idHex.slice(0, 16)}…`));
    const handle = await state.api.evidence(idHex);
    const tx = await buildTransfer(key, session.address, handle.record, newOwner, amendment);
    await submitAndTrack("transfer", tx.txB64, tx.txIdHex);
  } catch (err) {
    setStatus(renderInvokeStatus("error", err instanceof ApiRequestError ? `${err.code}: ${err.detail}` : String(err)));
  }
}

async function doErase(idHex: string): Promise<void> {
  try {
    const key = requireKey();
    const session = state.api.session!;
    if (!window.confirm("Destroy the payload? Metadata and custody history stay on chain.")) return;
    setStatus(renderInvokeStatus("signing", `evidence ${idHex.slice(0, 16)}…`));
    const handle = await state.api.evidence(idHex);
    const tx = await buildErase(key, session.address, handle.record);
    await submitAndTrack("erase", tx.txB64, tx.txIdHex);
  } catch (err) {
    setStatus(renderInvokeStatus("error", err instanceof ApiRequestError ? `${err.code}: ${err.detail}` : String(err)));
  }
}

function wireEvidenceActions(): void {
  el("main")
    .querySelectorAll<HTMLButtonElement>("button[data-action]")
    .forEach((btn) => {
      const id = btn.dataset.id!;
      if (btn.dataset.action === "transfer") btn.onclick = () => void doTransfer(id);
      if (btn.dataset.action === "erase") btn.onclick = () => void doErase(id);
    });
}

function renderInvokeForms(): void {
  setMain(`
    <h2>Invoke</h2>
    <form id="create-form" class="card">
      <h3>Create evidence record (ISP)</h3>
      <label>evidence id (hex, from the evDB) <input name="id" required></label>
      <label>description <input name="dsc"></label>
      <label>incident time (UTC seconds) <input name="tm" type="number" required></label>
      <label>device type <input name="type"></label>
      <button>Sign and submit</button>
    </form>
    <form id="register-form" class="card">
      <h3>Register device state (ISP)</h3>
      <label>device id <input name="device_id" required></label>
      <label>firmware hash (hex) <input name="fw" required></label>
      <label>config hash (hex) <input name="cfg" required></label>
      <button>Sign and submit</button>
    </form>
  `);
  (el("create-form") as HTMLFormElement).onsubmit = (ev) => {
    ev.preventDefault();
    const data = new FormData(ev.target as HTMLFormElement);
    void (async () => {
      try {
        const key = requireKey();
        const session = state.api.session!;
        setStatus(renderInvokeStatus("signing", "create"));
        const tx = await buildCreate(
          key,
          session.address,
          String(data.get("id")).trim(),
          String(data.get("dsc") ?? ""),
          Number(data.get("tm")),
          String(data.get("type") ?? ""),
        );
        await submitAndTrack("create", tx.txB64, tx.txIdHex);
      } catch (err) {
        setStatus(renderInvokeStatus("error", err instanceof ApiRequestError ? `${err.code}: ${err.detail}` : String(err)));
      }
    })();
  };
  (el("register-form") as HTMLFormElement).onsubmit = (ev) => {
    ev.preventDefault();
    const data = new FormData(ev.target as HTMLFormElement);
    void (async () => {
      try {
        const key = requireKey();
        const session = state.api.session!;
        setStatus(renderInvokeStatus("signing", "register device"));
        const tx = await buildDeviceRegister(
          key,
          session.address,
          String(data.get("device_id")).trim(),
          String(data.get("fw")).trim(),
          String(data.get("cfg")).trim(),
        );
        await submitAndTrack("register_device", tx.txB64, tx.txIdHex);
      } catch (err) {
        setStatus(renderInvokeStatus("error", err instanceof ApiRequestError ? `${err.code}: ${err.detail}` : String(err)));
      }
    })();
  };
}

// -- boot -------------------------------------------------------------------------

export function boot(): void {
  (el("api-base") as HTMLInputElement).value = state.api.baseUrl;
  el("login").onclick = () => void handleLogin();
  window.addEventListener("hashchange", () => void renderRoute());
  void renderRoute();
  schedulePolling();
}

if (typeof document !== "undefined" && document.getElementById("main")) {
  boot();
}
