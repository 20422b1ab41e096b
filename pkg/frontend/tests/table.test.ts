import { describe, expect, it } from "vitest";
import { COLUMNS, rowsFromDevices } from "../src/model.js";
import { escapeHtml, renderTable } from "../src/table.js";
import type { DeviceDoc } from "../src/types.js";

const DEVICES: DeviceDoc[] = [
  {
    device_id: "of:0000000000000003",
    flow_count: 98,
    total_packets: 24188,
    total_bytes: 1548032,
    avg_packet_size: 64.0,
    link_count: 4,
    prediction: { score: 0.9991, label: 1, model_version: 2, ts: 120.0 },
  },
  {
    device_id: "host:0001",
    flow_count: 11,
    total_packets: 559,
    total_bytes: 296815,
    avg_packet_size: 530.97,
    link_count: 1,
    prediction: { score: 0.0023, label: 0, model_version: 2, ts: 120.0 },
  },
];

describe("renderTable", () => {
  it("renders the seven column headers in order", () => {
    const html = renderTable([]);
    const headers = [...html.matchAll(/<th>(.*?)<\/th>/g)].map((m) => m[1]);
    expect(headers).toEqual([...COLUMNS]);
  });

  it("renders one row per device with a data-device handle", () => {
    const html = renderTable(rowsFromDevices(DEVICES));
    expect(html.match(/<tr data-device=/g)).toHaveLength(2);
    expect(html).toContain('data-device="of:0000000000000003"');
    expect(html).toContain('data-device="host:0001"');
  });

  it("highlights only anomalous rows", () => {
    const html = renderTable(rowsFromDevices(DEVICES));
    expect(html.match(/class="anomalous"/g)).toHaveLength(1);
    const anomalousRow = html.slice(html.indexOf("of:0000000000000003") - 120);
    expect(anomalousRow).toContain('class="anomalous"');
  });

  it("puts score and model version in the row tooltip", () => {
    const html = renderTable(rowsFromDevices(DEVICES));
    expect(html).toContain("score 0.9991");
    expect(html).toContain("model v2");
  });

  it("escapes hostile ids", () => {
    const rows = rowsFromDevices([
      { ...DEVICES[1], device_id: '<img src=x onerror="x">&' },
    ]);
    const html = renderTable(rows);
    expect(html).not.toContain("<img");
    expect(html).toContain("&lt;img");
    expect(html).toContain("&amp;");
  });
});

describe("escapeHtml", () => {
  it("covers the five specials", () => {
    expect(escapeHtml(`&<>"'`)).toBe("&amp;&lt;&gt;&quot;&#39;");
  });
});
