import { describe, expect, it } from "vitest";
import { barIndexAt, barTooltip, layoutHistogram } from "../src/histogram.js";

describe("layoutHistogram", () => {
  it("scales the tallest bin to the full chart height", () => {
    const bars = layoutHistogram([0.1, 0.4, 0.5], [10, 50, 90], 300, 120);
    expect(bars).toHaveLength(3);
    expect(bars[2].height).toBeCloseTo(120, 10);
    expect(bars[1].height).toBeCloseTo(96, 10);
    expect(bars[0].height).toBeCloseTo(24, 10);
  });

  it("lays bars left to right with equal widths and bottom alignment", () => {
    const bars = layoutHistogram([0.5, 0.5], [25, 75], 200, 100);
    expect(bars[0].x).toBe(0);
    expect(bars[1].x).toBe(100);
    expect(bars[0].width).toBe(100);
    expect(bars[0].y + bars[0].height).toBeCloseTo(100, 10);
  });

  it("echoes server weights and centres verbatim", () => {
    const bars = layoutHistogram([0.123456, 0.876544], [12.5, 87.5], 100, 50);
    expect(bars[0].weight).toBe(0.123456);
    expect(bars[0].centre).toBe(12.5);
  });

  it("handles empty and all-zero histograms", () => {
    expect(layoutHistogram([], [], 100, 50)).toEqual([]);
    const bars = layoutHistogram([0, 0], [25, 75], 100, 50);
    expect(bars[0].height).toBe(0);
    expect(bars[1].height).toBe(0);
  });

  it("rejects mismatched weights and centres", () => {
    expect(() => layoutHistogram([0.5], [25, 75], 100, 50)).toThrow(/weights/);
  });
});

describe("barIndexAt", () => {
  it("maps chart x to bin index", () => {
    expect(barIndexAt(0, 100, 4)).toBe(0);
    expect(barIndexAt(24.9, 100, 4)).toBe(0);
    expect(barIndexAt(25, 100, 4)).toBe(1);
    expect(barIndexAt(99.9, 100, 4)).toBe(3);
  });

  it("returns null outside the chart", () => {
    expect(barIndexAt(-1, 100, 4)).toBeNull();
    expect(barIndexAt(100, 100, 4)).toBeNull();
    expect(barIndexAt(10, 100, 0)).toBeNull();
  });
});

describe("barTooltip", () => {
  it("shows the bin centre and the weight as a percentage", () => {
    const [bar] = layoutHistogram([0.0425], [37.5], 10, 10);
    expect(barTooltip(bar)).toBe("L = 37.5: 4.25%");
  });
});
