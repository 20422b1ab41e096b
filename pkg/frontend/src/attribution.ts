import { escapeHtml } from "./table.js";
import { MITIGATION_ACTIONS, type AttributionDoc, type ContributionDoc, type ReceiptDoc } from "./types.js";

/** Largest |contribution| first; ties resolve by feature name for a stable render. */
export function sortedContributions(contribs: ContributionDoc[]): ContributionDoc[] {
  return [...contribs].sort((a, b) => {
    const d = Math.abs(b.value) - Math.abs(a.value);
    return d !== 0 ? d : a.feature.localeCompare(b.feature);
  });
}

export function barWidthPercent(value: number, maxAbs: number): number {
  if (maxAbs <= 0) return 0;
  return Math.round((Math.abs(value) / maxAbs) * 1000) / 10;
}

function signed(value: number): string {
  return `${value >= 0 ? "+" : ""}${value.toFixed(3)}`;
}

/** Modal body: ranked contribution bars, plus mitigation controls when the
 *  device is currently flagged.  Benign devices get a read-only view. */
export function renderAttribution(doc: AttributionDoc, anomalous: boolean): string {
  const ranked = sortedContributions(doc.contributions);
  const maxAbs = ranked.length ? Math.abs(ranked[0].value) : 0;
  const bars = ranked
    .map((c) => {
      const pct = barWidthPercent(c.value, maxAbs);
      const cls = c.value >= 0 ? "pos" : "neg";
      return (
        `<li><span class="feature">${escapeHtml(c.feature)}</span>` +
        `<span class="amount">${signed(c.value)}</span>` +
        `<span class="bar ${cls}" style="width:${pct}%"></span></li>`
      );
    })
    .join("");
  const options = MITIGATION_ACTIONS.map(
    (a) => `<option value="${a.value}">${a.label}</option>`,
  ).join("");
  const controls = anomalous
    ? `<div class="mitigate"><select data-role="action">${options}</select>` +
      `<button data-action="mitigate">Mitigate</button></div>` +
      `<div class="mitigate-status" data-role="mitigate-status"></div>`
    : `<p class="readonly">not flagged right now – read-only view</p>`;
  return (
    `<div class="modal-head"><h2>${escapeHtml(doc.device_id)}</h2>` +
    `<button class="close" data-action="close" title="close">×</button></div>` +
    `<p class="modal-sub">score ${doc.score.toFixed(4)} · ` +
    `margin base ${signed(doc.base_value)} · t=${doc.ts}</p>` +
    `<p class="note">additive attribution: base plus the sum of these ` +
    `contributions equals the raw score margin</p>` +
    `<ul class="bars">${bars}</ul>` +
    controls +
    `<div class="receipt" data-role="receipt"></div>`
  );
}

export function renderReceipt(r: ReceiptDoc): string {
  return (
    `<p class="receipt-line">receipt #${r.receipt_id}: ` +
    `${escapeHtml(r.action)} applied to ${escapeHtml(r.device_id)}` +
    ` at t=${r.applied_at}</p>`
  );
}

export function renderModalError(message: string): string {
  return `<p class="error">${escapeHtml(message)}</p>`;
}
