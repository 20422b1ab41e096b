import { COLUMNS, cellValues, isAnomalous, rowTooltip, type DeviceRow } from "./model.js";

export function escapeHtml(s: string): string {
  return s
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export function renderTable(rows: DeviceRow[]): string {
  const head = COLUMNS.map((c) => `<th>${escapeHtml(c)}</th>`).join("");
  const body = rows
    .map((row) => {
      const cls = isAnomalous(row) ? ' class="anomalous"' : "";
      const cells = cellValues(row)
        .map((v) => `<td>${escapeHtml(v)}</td>`)
        .join("");
      return (
        `<tr data-device="${escapeHtml(row.id)}"${cls}` +
        ` title="${escapeHtml(rowTooltip(row))}">${cells}</tr>`
      );
    })
    .join("");
  return (
    `<table class="devices"><thead><tr>${head}</tr></thead>` +
    `<tbody>${body}</tbody></table>`
  );
}
