import { describe, expect, it } from "vitest";
import { circleLayout, deviceKind, renderTopologySvg, shortLabel } from "../src/topology.js";
import type { TopologyDoc } from "../src/types.js";

const TOPO: TopologyDoc = {
  devices: ["of:0000000000000001", "of:0000000000000002", "host:0001"],
  links: [
    ["of:0000000000000001", "of:0000000000000002"],
    ["of:0000000000000002", "host:0001"],
  ],
};

describe("device naming", () => {
  it("classifies switches and hosts by id prefix", () => {
    expect(deviceKind("of:0000000000000003")).toBe("switch");
    expect(deviceKind("host:0004")).toBe("host");
  });

  it("shortens ids to s/h labels", () => {
    expect(shortLabel("of:0000000000000003")).toBe("s3");
    expect(shortLabel("of:000000000000000c")).toBe("s12");
    expect(shortLabel("host:0004")).toBe("h4");
    expect(shortLabel("weird")).toBe("weird");
  });
});

describe("circleLayout", () => {
  it("places every device at a distinct point inside the canvas", () => {
    const nodes = circleLayout(TOPO.devices, 640, 420);
    expect(nodes).toHaveLength(3);
    const seen = new Set(nodes.map((n) => `${n.x.toFixed(2)},${n.y.toFixed(2)}`));
    expect(seen.size).toBe(3);
    for (const n of nodes) {
      expect(n.x).toBeGreaterThanOrEqual(0);
      expect(n.x).toBeLessThanOrEqual(640);
      expect(n.y).toBeGreaterThanOrEqual(0);
      expect(n.y).toBeLessThanOrEqual(420);
    }
  });
});

describe("renderTopologySvg", () => {
  it("draws one node per device and one line per link", () => {
    const svg = renderTopologySvg(TOPO, new Set());
    expect(svg.match(/<g class="node/g)).toHaveLength(3);
    expect(svg.match(/<line class="link"/g)).toHaveLength(2);
    expect(svg.match(/<rect/g)).toHaveLength(2); // switches
    expect(svg.match(/<circle/g)).toHaveLength(1); // hosts
  });

  it("tags flagged devices with the anomalous class", () => {
    const svg = renderTopologySvg(TOPO, new Set(["host:0001"]));
    expect(svg).toContain('class="node host anomalous"');
    expect(svg.match(/anomalous/g)).toHaveLength(1);
  });

  it("carries the full id in a title and data attribute", () => {
    const svg = renderTopologySvg(TOPO, new Set());
    expect(svg).toContain("<title>of:0000000000000001</title>");
    expect(svg).toContain('data-device="host:0001"');
    expect(svg).toContain(">s1<");
    expect(svg).toContain(">h1<");
  });

  it("renders a placeholder when there is no topology", () => {
    const svg = renderTopologySvg({ devices: [], links: [] }, new Set());
    expect(svg).toContain("no topology");
    expect(svg).not.toContain("<g");
  });

  it("skips links that reference unknown devices", () => {
    const svg = renderTopologySvg(
      { devices: ["host:0001"], links: [["host:0001", "host:0099"]] },
      new Set(),
    );
    expect(svg).not.toContain("<line");
  });
});
