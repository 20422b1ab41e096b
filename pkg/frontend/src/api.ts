import type {
  AttributionDoc,
  DeviceDoc,
  MitigationAction,
  ModelDoc,
  ReceiptDoc,
  TopologyDoc,
} from "./types.js";

export class HttpError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "HttpError";
  }
}

type FetchFn = (url: string, init?: RequestInit) => Promise<Response>;

async function errorDetail(res: Response): Promise<string> {
  // FastAPI errors carry {"detail": ...}; fall back to raw text / status.
  try {
    const body = await res.text();
    try {
      const doc = JSON.parse(body);
      if (doc && typeof doc.detail === "string") return doc.detail;
    } catch {
      /* not JSON */
    }
    if (body) return body;
  } catch {
    /* unreadable body */
  }
  return `HTTP ${res.status}`;
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchFn;

  constructor(baseUrl: string, fetchFn?: FetchFn) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.base + path);
    if (!res.ok) throw new HttpError(res.status, await errorDetail(res));
    return (await res.json()) as T;
  }

  getTopology(): Promise<TopologyDoc> {
    return this.getJson("/topology");
  }

  getDevices(): Promise<DeviceDoc[]> {
    return this.getJson("/devices");
  }

  getModel(): Promise<ModelDoc> {
    return this.getJson("/model");
  }

  getAttribution(deviceId: string): Promise<AttributionDoc> {
    return this.getJson(`/devices/${encodeURIComponent(deviceId)}/attribution`);
  }

  async mitigate(deviceId: string, action: MitigationAction): Promise<ReceiptDoc> {
    const res = await this.fetchFn(this.base + "/mitigate", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ device_id: deviceId, action }),
    });
    if (!res.ok) throw new HttpError(res.status, await errorDetail(res));
    return (await res.json()) as ReceiptDoc;
  }

  streamUrl(): string {
    return this.base + "/stream";
  }
}
