import { ApiClient, HttpError } from "./api.js";
import {
  applyEvent,
  isAnomalous,
  rowsFromDevices,
  type DeviceRow,
} from "./model.js";
import { renderAttribution, renderModalError, renderReceipt } from "./attribution.js";
import { renderTable } from "./table.js";
import { renderTopologySvg } from "./topology.js";
import { PredictionStream, type EventSourceLike, type StreamStatus } from "./stream.js";
import type { MitigationAction, TopologyDoc } from "./types.js";

const params = new URLSearchParams(location.search);
const api = new ApiClient(params.get("api") ?? location.origin);

const el = {
  banner: document.getElementById("banner")!,
  topology: document.getElementById("topology")!,
  table: document.getElementById("table")!,
  model: document.getElementById("model-info")!,
  modal: document.getElementById("modal")!,
  backdrop: document.getElementById("backdrop")!,
};

let rows: DeviceRow[] = [];
let topo: TopologyDoc = { devices: [], links: [] };
let modalDevice: string | null = null;
let lastModelVersion = 0;
let refreshTimer: ReturnType<typeof setTimeout> | null = null;

function anomalousIds(): Set<string> {
  return new Set(rows.filter(isAnomalous).map((r) => r.id));
}

function render(): void {
  el.table.innerHTML = renderTable(rows);
  el.topology.innerHTML = renderTopologySvg(topo, anomalousIds());
}

function showBanner(text: string | null): void {
  if (text === null) {
    el.banner.classList.add("hidden");
  } else {
    el.banner.textContent = text;
    el.banner.classList.remove("hidden");
  }
}

// Counters change every tick but the stream only carries predictions, so a
// fresh /devices fetch trails each burst of events.
function scheduleCounterRefresh(): void {
  if (refreshTimer !== null) return;
  refreshTimer = setTimeout(async () => {
    refreshTimer = null;
    try {
      rows = rowsFromDevices(await api.getDevices());
      render();
    } catch {
      /* the stale banner already covers a dead server */
    }
  }, 250);
}

async function refreshModelInfo(): Promise<void> {
  try {
    const doc = await api.getModel();
    lastModelVersion = doc.version;
    const learner = typeof doc.params.learner === "string" ? doc.params.learner : "?";
    el.model.textContent =
      `model v${doc.version} · ${learner} · threshold ${doc.threshold.toFixed(4)}`;
  } catch {
    el.model.textContent = "";
  }
}

function onStreamEvent(ev: Parameters<typeof applyEvent>[1]): void {
  const result = applyEvent(rows, ev);
  if (result.changed) {
    rows = result.rows;
    render();
  }
  scheduleCounterRefresh();
  if (ev.model_version !== lastModelVersion) void refreshModelInfo();
}

function onStreamStatus(status: StreamStatus): void {
  if (status === "live") showBanner(null);
  else if (status === "stale") showBanner("stale data – reconnecting…");
}

async function openModal(deviceId: string): Promise<void> {
  modalDevice = deviceId;
  el.backdrop.classList.remove("hidden");
  el.modal.classList.remove("hidden");
  el.modal.innerHTML = `<p class="loading">loading attribution…</p>`;
  try {
    const doc = await api.getAttribution(deviceId);
    if (modalDevice !== deviceId) return;
    const row = rows.find((r) => r.id === deviceId);
    el.modal.innerHTML = renderAttribution(doc, row ? isAnomalous(row) : false);
  } catch (err) {
    if (modalDevice !== deviceId) return;
    el.modal.innerHTML =
      `<div class="modal-head"><h2>${deviceId}</h2>` +
      `<button class="close" data-action="close">×</button></div>` +
      renderModalError(err instanceof Error ? err.message : "request failed");
  }
}

function closeModal(): void {
  modalDevice = null;
  el.modal.classList.add("hidden");
  el.backdrop.classList.add("hidden");
  el.modal.innerHTML = "";
}

// Mitigation is never optimistic: the button stays disabled until the
// receipt (or an error) comes back, and the table only changes when the
// server's own events say so.
async function runMitigation(button: HTMLButtonElement): Promise<void> {
  if (!modalDevice) return;
  const device = modalDevice;
  const select = el.modal.querySelector<HTMLSelectElement>('[data-role="action"]');
  const status = el.modal.querySelector<HTMLElement>('[data-role="mitigate-status"]');
  const receiptBox = el.modal.querySelector<HTMLElement>('[data-role="receipt"]');
  const action = (select?.value ?? "drop") as MitigationAction;
  button.disabled = true;
  if (status) status.textContent = "waiting for receipt…";
  try {
    const receipt = await api.mitigate(device, action);
    if (status) status.textContent = "";
    if (receiptBox) receiptBox.innerHTML += renderReceipt(receipt);
  } catch (err) {
    const detail =
      err instanceof HttpError ? `${err.status}: ${err.message}` : "request failed";
    if (status) status.innerHTML = renderModalError(detail);
  } finally {
    button.disabled = false;
  }
}

function wireClicks(): void {
  el.table.addEventListener("click", (ev) => {
    const tr = (ev.target as HTMLElement).closest("tr[data-device]");
    if (tr) void openModal(tr.getAttribute("data-device")!);
  });
  el.topology.addEventListener("click", (ev) => {
    const node = (ev.target as HTMLElement).closest("g[data-device]");
    if (node) void openModal(node.getAttribute("data-device")!);
  });
  el.modal.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.closest('[data-action="close"]')) closeModal();
    const mitigate = target.closest<HTMLButtonElement>('[data-action="mitigate"]');
    if (mitigate) void runMitigation(mitigate);
  });
  el.backdrop.addEventListener("click", closeModal);
}

async function boot(): Promise<void> {
  try {
    const [topoDoc, deviceDocs] = await Promise.all([
      api.getTopology(),
      api.getDevices(),
    ]);
    topo = topoDoc;
    rows = rowsFromDevices(deviceDocs);
    render();
    void refreshModelInfo();
  } catch {
    showBanner("twin service unreachable – retrying…");
    setTimeout(boot, 3000);
  }
}

wireClicks();
void boot();
new PredictionStream(
  api.streamUrl(),
  (url) => new EventSource(url) as EventSourceLike,
  { onEvent: onStreamEvent, onStatus: onStreamStatus },
).start();
