// Server document shapes, mirrored verbatim from the twin HTTP API.
// The client never derives scores or labels; it renders what arrives.

export interface PredictionDoc {
  score: number;
  label: 0 | 1;
  model_version: number;
  ts: number;
}

export interface DeviceDoc {
  device_id: string;
  flow_count: number;
  total_packets: number;
  total_bytes: number;
  avg_packet_size: number;
  link_count: number;
  prediction: PredictionDoc | null;
}

export interface TopologyDoc {
  devices: string[];
  links: [string, string][];
}

export interface ContributionDoc {
  feature: string;
  value: number;
}

export interface AttributionDoc {
  device_id: string;
  ts: number;
  score: number;
  base_value: number;
  contributions: ContributionDoc[];
}

export interface ReceiptDoc {
  receipt_id: number;
  device_id: string;
  action: string;
  applied_at: number;
  model_version: number;
  issued_at: number;
}

export interface ModelDoc {
  version: number;
  params: Record<string, unknown>;
  threshold: number;
  trained_at: string | null;
}

// One server-sent event per fresh prediction.
export interface StreamEventDoc {
  device_id: string;
  label_pred: 0 | 1;
  model_version: number;
  score: number;
  ts: number;
}

export type MitigationAction = "drop" | "rate_limit" | "reroute";

export const MITIGATION_ACTIONS: { value: MitigationAction; label: string }[] = [
  { value: "drop", label: "drop" },
  { value: "rate_limit", label: "rate-limit" },
  { value: "reroute", label: "reroute" },
];
