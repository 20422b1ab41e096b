import type { DeviceDoc, StreamEventDoc } from "./types.js";

// Operator table columns, in render order.
export const COLUMNS = [
  "ID",
  "Flow Count",
  "Total Packets",
  "Total Bytes",
  "Avg Packet Size",
  "Link Count",
  "t+15 Anomaly Prediction",
] as const;

export interface RowPrediction {
  label: 0 | 1;
  score: number;
  modelVersion: number;
  ts: number;
}

export interface DeviceRow {
  id: string;
  flowCount: number;
  totalPackets: number;
  totalBytes: number;
  avgPacketSize: number;
  linkCount: number;
  prediction: RowPrediction | null;
}

export function rowsFromDevices(docs: DeviceDoc[]): DeviceRow[] {
  return docs.map((d) => ({
    id: d.device_id,
    flowCount: d.flow_count,
    totalPackets: d.total_packets,
    totalBytes: d.total_bytes,
    avgPacketSize: d.avg_packet_size,
    linkCount: d.link_count,
    prediction: d.prediction
      ? {
          label: d.prediction.label,
          score: d.prediction.score,
          modelVersion: d.prediction.model_version,
          ts: d.prediction.ts,
        }
      : null,
  }));
}

export interface ApplyResult {
  rows: DeviceRow[];
  changed: boolean;
  // true when this event turned a non-anomalous row anomalous
  flipped: boolean;
}

/** Fold one stream event into the table model.  Only prediction fields move;
 *  counters stay whatever the last /devices fetch said.  Events older than
 *  the row's current prediction are dropped (reconnects replay a backlog). */
export function applyEvent(rows: DeviceRow[], ev: StreamEventDoc): ApplyResult {
  const i = rows.findIndex((r) => r.id === ev.device_id);
  if (i < 0) return { rows, changed: false, flipped: false };
  const prev = rows[i].prediction;
  if (prev && ev.ts < prev.ts) return { rows, changed: false, flipped: false };
  const next = rows.slice();
  next[i] = {
    ...rows[i],
    prediction: {
      label: ev.label_pred,
      score: ev.score,
      modelVersion: ev.model_version,
      ts: ev.ts,
    },
  };
  const flipped = (prev?.label ?? 0) === 0 && ev.label_pred === 1;
  return { rows: next, changed: true, flipped };
}

export function isAnomalous(row: DeviceRow): boolean {
  return row.prediction?.label === 1;
}

/** The seven cell texts for one row, in column order. */
export function cellValues(row: DeviceRow): string[] {
  return [
    row.id,
    String(row.flowCount),
    String(row.totalPackets),
    String(row.totalBytes),
    row.avgPacketSize.toFixed(1),
    String(row.linkCount),
    row.prediction ? String(row.prediction.label) : "–",
  ];
}

export function rowTooltip(row: DeviceRow): string {
  if (!row.prediction) return "no prediction yet";
  const p = row.prediction;
  return `score ${p.score.toFixed(4)} · model v${p.modelVersion} · t=${p.ts}`;
}
