import { describe, expect, it } from "vitest";

import {
  cellSpanToPx,
  elementRect,
  guidelinePx,
  rasterize,
  snapToResolution,
} from "../src/geometry.js";
import { LegendEntry, SchemaJson } from "../src/types.js";

const schema: SchemaJson = {
  name: "toy",
  attributes: [
    ["class", 4],
    ["x_min", 64],
    ["y_min", 64],
    ["x_max", 64],
    ["y_max", 64],
  ],
  num_classes: 4,
  element_capacity: 16,
  canvas_width: 256,
  canvas_height: 256,
  class_attribute_index: 0,
  class_names: ["container", "image", "text", "button"],
};

const legend: LegendEntry[] = [
  { class_id: 0, name: "container", color: [10, 20, 30] },
  { class_id: 1, name: "image", color: [200, 50, 60] },
  { class_id: 2, name: "text", color: [5, 150, 90] },
  { class_id: 3, name: "button", color: [250, 210, 40] },
];

describe("cell-to-pixel mapping", () => {
  it("covers cells inclusively", () => {
    expect(cellSpanToPx(0, 63, 256, 64)).toEqual([0, 256]);
    expect(cellSpanToPx(5, 5, 256, 64)).toEqual([20, 24]);
    expect(cellSpanToPx(16, 31, 256, 64)).toEqual([64, 128]);
  });

  it("never collapses below one pixel", () => {
    // 7px canvas, 64 cells: cell 10 maps to [1, 1) before the floor fix.
    expect(cellSpanToPx(10, 10, 7, 64)).toEqual([1, 2]);
  });

  it("positions element rectangles from the coordinate attributes", () => {
    const rect = elementRect(schema, {
      valid: true,
      class: 2,
      x_min: 4,
      y_min: 8,
      x_max: 15,
      y_max: 23,
    });
    expect(rect).toEqual({ x0: 16, y0: 32, x1: 64, y1: 96 });
  });
});

describe("guideline snapping", () => {
  it("maps pixels to the nearest cell boundary", () => {
    expect(snapToResolution(0, 256, 64)).toBe(0);
    expect(snapToResolution(6, 256, 64)).toBe(2); // 6/4 = 1.5 rounds up
    expect(snapToResolution(127, 256, 64)).toBe(32);
  });

  it("rejects out-of-canvas pixels", () => {
    expect(snapToResolution(-1, 256, 64)).toBeNull();
    expect(snapToResolution(257, 256, 64)).toBeNull();
  });

  it("clamps the far edge into the valid position range", () => {
    expect(snapToResolution(256, 256, 64)).toBe(63);
  });

  it("draws guidelines on the cell's leading edge", () => {
    expect(guidelinePx(32, 256, 64)).toBe(128);
    expect(guidelinePx(0, 256, 64)).toBe(0);
  });
});

describe("pure rasterizer", () => {
  it("fills a single element in its class color over white", () => {
    const rgb = rasterize(schema, legend, {
      elements: [
        { valid: true, class: 1, x_min: 0, y_min: 0, x_max: 1, y_max: 0 },
      ],
    });
    // Pixel (0, 0) is inside the box.
    expect([rgb[0], rgb[1], rgb[2]]).toEqual([200, 50, 60]);
    // Pixel (255, 255) is background.
    const off = (255 * 256 + 255) * 3;
    expect([rgb[off], rgb[off + 1], rgb[off + 2]]).toEqual([255, 255, 255]);
  });

  it("paints in element order so later elements cover earlier ones", () => {
    const rgb = rasterize(schema, legend, {
      elements: [
        { valid: true, class: 1, x_min: 0, y_min: 0, x_max: 10, y_max: 10 },
        { valid: true, class: 2, x_min: 0, y_min: 0, x_max: 10, y_max: 10 },
      ],
    });
    expect([rgb[0], rgb[1], rgb[2]]).toEqual([5, 150, 90]);
  });

  it("skips elements marked invalid", () => {
    const rgb = rasterize(schema, legend, {
      elements: [
        { valid: false, class: 3, x_min: 0, y_min: 0, x_max: 63, y_max: 63 },
      ],
    });
    expect([rgb[0], rgb[1], rgb[2]]).toEqual([255, 255, 255]);
  });
});
