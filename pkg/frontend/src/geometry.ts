/**
 * Pixel geometry mirrored from the server's renderer, so the vector canvas
 * shows elements at exactly the pixels the service rasterizes.
 */
import {
  ElementJson,
  LayoutJson,
  LegendEntry,
  SchemaJson,
  schemaResolution,
} from "./types.js";

export interface PxRect {
  x0: number;
  y0: number;
  x1: number; // exclusive
  y1: number; // exclusive
}

/**
 * Boxes cover quantized cells [v0, v1] inclusive; map cell edges to pixel
 * edges. Matches the service renderer including the 1px minimum.
 */
export function cellSpanToPx(
  v0: number,
  v1: number,
  size: number,
  resolution: number,
): [number, number] {
  const p0 = Math.floor((v0 * size) / resolution);
  const p1 = Math.floor(((v1 + 1) * size) / resolution);
  return [p0, Math.max(p1, p0 + 1)];
}

/** Pixel rectangle of one element on the schema canvas. */
export function elementRect(schema: SchemaJson, el: ElementJson): PxRect {
  const res = schemaResolution(schema);
  const [x0, x1] = cellSpanToPx(
    el["x_min"] as number,
    el["x_max"] as number,
    schema.canvas_width,
    res,
  );
  const [y0, y1] = cellSpanToPx(
    el["y_min"] as number,
    el["y_max"] as number,
    schema.canvas_height,
    res,
  );
  return { x0, y0, x1, y1 };
}

/** Canvas pixel of a guideline at quantized position (a cell's left/top edge). */
export function guidelinePx(pos: number, size: number, resolution: number): number {
  return Math.floor((pos * size) / resolution);
}

/**
 * Snap a canvas pixel coordinate to the nearest quantized guideline position.
 * Returns null when the click is outside the canvas (the caller shows a cue).
 */
export function snapToResolution(
  px: number,
  size: number,
  resolution: number,
): number | null {
  if (px < 0 || px > size) return null;
  const pos = Math.round((px * resolution) / size);
  return Math.min(pos, resolution - 1);
}

/**
 * Pure rasterizer with the same semantics as the service PNG: white ground,
 * flat class-color fills, painted in element order so later elements cover
 * earlier ones. Returns RGB, row-major, 3 bytes per pixel.
 */
export function rasterize(
  schema: SchemaJson,
  legend: LegendEntry[],
  layout: LayoutJson,
): Uint8Array {
  const w = schema.canvas_width;
  const h = schema.canvas_height;
  const buf = new Uint8Array(w * h * 3).fill(255);
  const classAttr = schema.attributes[schema.class_attribute_index][0];
  for (const el of layout.elements) {
    if (el.valid === false) continue;
    const rect = elementRect(schema, el);
    const color = legend[el[classAttr] as number].color;
    for (let y = rect.y0; y < rect.y1; y++) {
      let o = (y * w + rect.x0) * 3;
      for (let x = rect.x0; x < rect.x1; x++) {
        buf[o] = color[0];
        buf[o + 1] = color[1];
        buf[o + 2] = color[2];
        o += 3;
      }
    }
  }
  return buf;
}
