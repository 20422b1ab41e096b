import { describe, expect, it } from "vitest";
import {
  barWidthPercent,
  renderAttribution,
  renderModalError,
  renderReceipt,
  sortedContributions,
} from "../src/attribution.js";
import type { AttributionDoc, ReceiptDoc } from "../src/types.js";

const DOC: AttributionDoc = {
  device_id: "host:0004",
  ts: 70.0,
  score: 0.9997,
  base_value: -0.028,
  contributions: [
    { feature: "flow_count", value: 10.596 },
    { feature: "total_packets", value: -2.539 },
    { feature: "avg_packet_size", value: 0.0 },
    { feature: "total_bytes", value: 2.539 },
    { feature: "link_count", value: -0.11 },
  ],
};

const RECEIPT: ReceiptDoc = {
  receipt_id: 7,
  device_id: "host:0004",
  action: "drop",
  applied_at: 70.0,
  model_version: 1,
  issued_at: 70.0,
};

describe("sortedContributions", () => {
  it("orders by absolute value descending", () => {
    const names = sortedContributions(DOC.contributions).map((c) => c.feature);
    expect(names).toEqual([
      "flow_count",
      "total_bytes",
      "total_packets",
      "link_count",
      "avg_packet_size",
    ]);
  });

  it("breaks absolute-value ties by feature name", () => {
    const tied = sortedContributions([
      { feature: "b", value: -1.0 },
      { feature: "a", value: 1.0 },
    ]);
    expect(tied.map((c) => c.feature)).toEqual(["a", "b"]);
  });

  it("does not mutate its input", () => {
    const input = [...DOC.contributions];
    sortedContributions(input);
    expect(input).toEqual(DOC.contributions);
  });
});

describe("barWidthPercent", () => {
  it("pins the largest contribution at 100", () => {
    expect(barWidthPercent(10.596, 10.596)).toBe(100);
    expect(barWidthPercent(-10.596, 10.596)).toBe(100);
  });

  it("scales the rest and survives an all-zero set", () => {
    expect(barWidthPercent(5.298, 10.596)).toBeCloseTo(50, 0);
    expect(barWidthPercent(0, 0)).toBe(0);
  });
});

describe("renderAttribution", () => {
  it("renders bars in ranked order with sign classes", () => {
    const html = renderAttribution(DOC, true);
    const order = [...html.matchAll(/class="feature">([a-z_]+)</g)].map((m) => m[1]);
    expect(order[0]).toBe("flow_count");
    expect(order.at(-1)).toBe("avg_packet_size");
    expect(html).toContain('class="bar pos"');
    expect(html).toContain('class="bar neg"');
    expect(html).toContain("+10.596");
    expect(html).toContain("-2.539");
  });

  it("offers the three mitigation actions only for anomalous devices", () => {
    const flagged = renderAttribution(DOC, true);
    expect(flagged).toContain('data-action="mitigate"');
    expect(flagged).toContain('value="drop"');
    expect(flagged).toContain('value="rate_limit"');
    expect(flagged).toContain('value="reroute"');

    const benign = renderAttribution(DOC, false);
    expect(benign).not.toContain('data-action="mitigate"');
    expect(benign).toContain("read-only");
  });

  it("shows score, base margin, and the additivity note", () => {
    const html = renderAttribution(DOC, false);
    expect(html).toContain("score 0.9997");
    expect(html).toContain("-0.028");
    expect(html).toContain("additive attribution");
  });

  it("escapes the device id", () => {
    const html = renderAttribution({ ...DOC, device_id: "<b>x</b>" }, false);
    expect(html).toContain("&lt;b&gt;x&lt;/b&gt;");
    expect(html).not.toContain("<b>x</b>");
  });
});

describe("receipts and errors", () => {
  it("summarizes a receipt", () => {
    const html = renderReceipt(RECEIPT);
    expect(html).toContain("receipt #7");
    expect(html).toContain("drop");
    expect(html).toContain("host:0004");
    expect(html).toContain("t=70");
  });

  it("escapes error text", () => {
    expect(renderModalError("<script>")).toContain("&lt;script&gt;");
  });
});
