/**
 * Vector rendering of the editor canvas. Elements are drawn from the layout
 * JSON (not the server PNG) so they stay selectable; geometry and colors are
 * the server renderer's, via geometry.ts and the shared /schema legend.
 */
import { elementRect, guidelinePx } from "./geometry.js";
import { EditorCore, EditorState } from "./state.js";
import { GuidelineJson, schemaResolution } from "./types.js";

function cssColor(rgb: [number, number, number]): string {
  return `rgb(${rgb[0]}, ${rgb[1]}, ${rgb[2]})`;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  core: EditorCore,
  state: EditorState,
): void {
  const { canvas_width: w, canvas_height: h } = core.schema;
  ctx.save();
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  ctx.translate(state.panX, state.panY);
  ctx.scale(state.zoom, state.zoom);

  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, w, h);

  const classAttr =
    core.schema.attributes[core.schema.class_attribute_index][0];
  if (state.layout !== null) {
    state.layout.elements.forEach((el, i) => {
      if (el.valid === false) return;
      const r = elementRect(core.schema, el);
      ctx.fillStyle = cssColor(core.legend[el[classAttr] as number].color);
      ctx.fillRect(r.x0, r.y0, r.x1 - r.x0, r.y1 - r.y0);
      if (state.selected.includes(i)) {
        ctx.strokeStyle = "#111111";
        ctx.lineWidth = 2 / state.zoom;
        ctx.setLineDash([5 / state.zoom, 3 / state.zoom]);
        ctx.strokeRect(
          r.x0 + 1,
          r.y0 + 1,
          r.x1 - r.x0 - 2,
          r.y1 - r.y0 - 2,
        );
        ctx.setLineDash([]);
      }
    });
  }

  const res = schemaResolution(core.schema);
  const drawLine = (g: GuidelineJson, dashed: boolean) => {
    ctx.strokeStyle = dashed ? "#d97706" : "#2563eb";
    ctx.lineWidth = 1 / state.zoom;
    ctx.setLineDash(dashed ? [4 / state.zoom, 4 / state.zoom] : []);
    ctx.beginPath();
    if (g.axis === "x") {
      const px = guidelinePx(g.pos, w, res) + 0.5;
      ctx.moveTo(px, 0);
      ctx.lineTo(px, h);
    } else {
      const py = guidelinePx(g.pos, h, res) + 0.5;
      ctx.moveTo(0, py);
      ctx.lineTo(w, py);
    }
    ctx.stroke();
    ctx.setLineDash([]);
  };
  for (const g of state.overlay.committed) drawLine(g, false);
  for (const g of state.overlay.draft) drawLine(g, true);

  ctx.strokeStyle = "#94a3b8";
  ctx.lineWidth = 1 / state.zoom;
  ctx.strokeRect(0, 0, w, h);
  ctx.restore();
}

/** Element index under a canvas pixel (topmost wins), or null. */
export function hitTest(
  core: EditorCore,
  state: EditorState,
  canvasX: number,
  canvasY: number,
): number | null {
  if (state.layout === null) return null;
  const x = (canvasX - state.panX) / state.zoom;
  const y = (canvasY - state.panY) / state.zoom;
  for (let i = state.layout.elements.length - 1; i >= 0; i--) {
    const el = state.layout.elements[i];
    if (el.valid === false) continue;
    const r = elementRect(core.schema, el);
    if (x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1) return i;
  }
  return null;
}

/** Canvas-space coordinates of a mouse event, before zoom/pan. */
export function eventCanvasPoint(
  canvas: HTMLCanvasElement,
  ev: MouseEvent,
): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * canvas.width,
    y: ((ev.clientY - rect.top) / rect.height) * canvas.height,
  };
}
