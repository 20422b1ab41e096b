import type { TopologyDoc } from "./types.js";
import { escapeHtml } from "./table.js";

export type DeviceKind = "switch" | "host";

export function deviceKind(id: string): DeviceKind {
  return id.startsWith("host:") ? "host" : "switch";
}

/** "of:0000000000000003" -> "s3", "host:0004" -> "h4"; anything else verbatim. */
export function shortLabel(id: string): string {
  if (id.startsWith("of:")) {
    const n = parseInt(id.slice(3), 16);
    if (Number.isFinite(n)) return `s${n}`;
  }
  if (id.startsWith("host:")) {
    const n = parseInt(id.slice(5), 16);
    if (Number.isFinite(n)) return `h${n}`;
  }
  return id;
}

export interface NodePos {
  id: string;
  x: number;
  y: number;
  kind: DeviceKind;
  label: string;
}

export function circleLayout(
  devices: string[],
  width = 640,
  height = 420,
  margin = 48,
): NodePos[] {
  const cx = width / 2;
  const cy = height / 2;
  const radius = Math.max(10, Math.min(width, height) / 2 - margin);
  return devices.map((id, i) => {
    const angle = (2 * Math.PI * i) / devices.length - Math.PI / 2;
    return {
      id,
      x: cx + radius * Math.cos(angle),
      y: cy + radius * Math.sin(angle),
      kind: deviceKind(id),
      label: shortLabel(id),
    };
  });
}

export function renderTopologySvg(
  doc: TopologyDoc,
  anomalous: ReadonlySet<string>,
  width = 640,
  height = 420,
): string {
  if (doc.devices.length === 0) {
    return (
      `<svg viewBox="0 0 ${width} ${height}" class="topology">` +
      `<text x="${width / 2}" y="${height / 2}" class="empty">no topology</text></svg>`
    );
  }
  const nodes = circleLayout(doc.devices, width, height);
  const at = new Map(nodes.map((n) => [n.id, n]));
  const parts: string[] = [`<svg viewBox="0 0 ${width} ${height}" class="topology">`];
  for (const [a, b] of doc.links) {
    const pa = at.get(a);
    const pb = at.get(b);
    if (!pa || !pb) continue;
    parts.push(
      `<line class="link" x1="${pa.x.toFixed(1)}" y1="${pa.y.toFixed(1)}"` +
        ` x2="${pb.x.toFixed(1)}" y2="${pb.y.toFixed(1)}"/>`,
    );
  }
  for (const n of nodes) {
    const cls = `node ${n.kind}${anomalous.has(n.id) ? " anomalous" : ""}`;
    const title = `<title>${escapeHtml(n.id)}</title>`;
    const shape =
      n.kind === "switch"
        ? `<rect x="${(n.x - 8).toFixed(1)}" y="${(n.y - 8).toFixed(1)}" width="16" height="16" rx="3"/>`
        : `<circle cx="${n.x.toFixed(1)}" cy="${n.y.toFixed(1)}" r="8"/>`;
    parts.push(
      `<g class="${cls}" data-device="${escapeHtml(n.id)}">${title}${shape}` +
        `<text x="${n.x.toFixed(1)}" y="${(n.y + 22).toFixed(1)}">${escapeHtml(n.label)}</text></g>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
