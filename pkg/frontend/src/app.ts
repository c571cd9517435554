/**
 * DOM wiring for the editor page: canvas on the left, condition panels on
 * the right, history strip along the bottom. All state transitions live in
 * state.ts; this file only dispatches them and re-renders.
 */
import { ApiClient, ApiError } from "./api.js";
import { HistoryEntry, appendEntry, makeEntry, replayMatches, replayRequest } from "./history.js";
import { drawScene, eventCanvasPoint, hitTest } from "./render.js";
import {
  EditorCore,
  EditorState,
  applyExtracted,
  applyGenerated,
  buildConditions,
  buildRequest,
  clearCounts,
  clearGuidelines,
  clearPin,
  clearSelection,
  createRequestGate,
  drawGuideline,
  editCounts,
  editPrompt,
  initialState,
  pinSelection,
  setPan,
  setSeed,
  setSteps,
  setWeight,
  setZoom,
  toggleSelect,
} from "./state.js";
import { CONDITION_NAMES, ConditionName, GenerateRequest } from "./types.js";

type Tool = "select" | "guide-x" | "guide-y" | "pan";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

async function main(): Promise<void> {
  const apiBase =
    new URLSearchParams(location.search).get("api") ?? location.origin;
  const api = new ApiClient(apiBase.replace(/\/$/, ""));
  const root = document.getElementById("app")!;

  let core: EditorCore;
  try {
    const info = await api.schema();
    core = { schema: info.schema, legend: info.legend };
  } catch (e) {
    root.textContent = `service unreachable at ${apiBase}: ${e}`;
    return;
  }

  let state: EditorState = initialState();
  let history: HistoryEntry[] = [];
  let tool: Tool = "select";
  let lastRequest: GenerateRequest | null = null;
  const gate = createRequestGate();

  // --- layout skeleton -------------------------------------------------------
  const stage = el("div", "stage");
  const canvas = el("canvas", "board");
  canvas.width = core.schema.canvas_width;
  canvas.height = core.schema.canvas_height;
  stage.appendChild(canvas);

  const side = el("div", "side");
  const strip = el("div", "strip");
  root.append(stage, side, strip);
  const ctx = canvas.getContext("2d")!;

  // --- right-hand panels -----------------------------------------------------
  const toolPanel = el("div", "panel");
  toolPanel.appendChild(el("h3", undefined, "Tool"));
  const toolRow = el("div", "row");
  (["select", "guide-x", "guide-y", "pan"] as Tool[]).forEach((t) => {
    const b = el("button", t === tool ? "tool active" : "tool", t);
    b.addEventListener("click", () => {
      tool = t;
      toolRow
        .querySelectorAll("button")
        .forEach((x) => x.classList.toggle("active", x.textContent === t));
    });
    toolRow.appendChild(b);
  });
  toolPanel.appendChild(toolRow);

  const promptPanel = el("div", "panel");
  promptPanel.appendChild(el("h3", undefined, "Prompt"));
  const promptBox = el("textarea") as HTMLTextAreaElement;
  promptBox.rows = 3;
  promptBox.placeholder = "one sentence per line; empty = unconditional";
  promptBox.addEventListener("input", () => {
    state = editPrompt(state, promptBox.value);
    refresh();
  });
  promptPanel.appendChild(promptBox);

  const countsPanel = el("div", "panel");
  countsPanel.appendChild(el("h3", undefined, "Class counts"));
  const countRows: HTMLSpanElement[] = [];
  core.schema.class_names.forEach((name, k) => {
    const row = el("div", "row");
    const swatch = el("span", "swatch");
    const [r, g, b] = core.legend[k].color;
    swatch.style.background = `rgb(${r}, ${g}, ${b})`;
    const label = el("span", "grow", name);
    const minus = el("button", undefined, "−");
    const value = el("span", "count", "—");
    const plus = el("button", undefined, "+");
    minus.addEventListener("click", () => {
      state = editCounts(core, state, k, -1);
      refresh();
    });
    plus.addEventListener("click", () => {
      state = editCounts(core, state, k, +1);
      refresh();
    });
    countRows.push(value);
    row.append(swatch, label, minus, value, plus);
    countsPanel.appendChild(row);
  });
  const countsClear = el("button", undefined, "clear counts");
  countsClear.addEventListener("click", () => {
    state = clearCounts(state);
    refresh();
  });
  countsPanel.appendChild(countsClear);

  const pinPanel = el("div", "panel");
  pinPanel.appendChild(el("h3", undefined, "Given design"));
  const pinInfo = el("div", "hint", "no elements pinned");
  const pinBtn = el("button", undefined, "pin selection");
  const unpinBtn = el("button", undefined, "clear pin");
  const deselectBtn = el("button", undefined, "deselect");
  pinBtn.addEventListener("click", () => {
    state = pinSelection(core, state);
    refresh();
  });
  unpinBtn.addEventListener("click", () => {
    state = clearPin(state);
    refresh();
  });
  deselectBtn.addEventListener("click", () => {
    state = clearSelection(state);
    refresh();
  });
  const pinRow = el("div", "row");
  pinRow.append(pinBtn, unpinBtn, deselectBtn);
  pinPanel.append(pinInfo, pinRow);

  const guidePanel = el("div", "panel");
  guidePanel.appendChild(el("h3", undefined, "Guidelines"));
  const guideInfo = el("div", "hint", "none");
  const guideClear = el("button", undefined, "clear guidelines");
  guideClear.addEventListener("click", () => {
    state = clearGuidelines(state);
    refresh();
  });
  guidePanel.append(guideInfo, guideClear);

  const guidancePanel = el("div", "panel");
  guidancePanel.appendChild(el("h3", undefined, "Guidance"));
  const weightInputs = new Map<ConditionName, HTMLInputElement>();
  CONDITION_NAMES.forEach((name) => {
    const row = el("div", "row");
    row.appendChild(el("span", "grow", `${name} w`));
    const input = el("input") as HTMLInputElement;
    input.type = "number";
    input.min = "0";
    input.step = "0.1";
    input.value = "0";
    input.addEventListener("input", () => {
      const w = Number(input.value);
      state = setWeight(state, name, Number.isFinite(w) ? w : 0);
      refresh();
    });
    weightInputs.set(name, input);
    row.appendChild(input);
    guidancePanel.appendChild(row);
  });
  const stepsRow = el("div", "row");
  stepsRow.appendChild(el("span", "grow", "steps"));
  const stepsInput = el("input") as HTMLInputElement;
  stepsInput.type = "number";
  stepsInput.min = "2";
  stepsInput.placeholder = "default";
  stepsInput.addEventListener("input", () => {
    state =
      stepsInput.value === ""
        ? setSteps(state, null)
        : setSteps(state, Number(stepsInput.value));
    refresh();
  });
  stepsRow.appendChild(stepsInput);
  const seedRow = el("div", "row");
  seedRow.appendChild(el("span", "grow", "seed"));
  const seedInput = el("input") as HTMLInputElement;
  seedInput.type = "number";
  seedInput.step = "1";
  seedInput.value = "0";
  seedInput.addEventListener("input", () => {
    state = setSeed(state, Math.trunc(Number(seedInput.value) || 0));
    refresh();
  });
  seedRow.appendChild(seedInput);
  guidancePanel.append(stepsRow, seedRow);

  const actionPanel = el("div", "panel");
  const generateBtn = el("button", "primary", "Generate");
  const extractBtn = el("button", undefined, "Extract conditions");
  const statusLine = el("div", "hint");
  const errorLine = el("div", "error");
  const retryBtn = el("button", undefined, "retry");
  retryBtn.style.display = "none";
  const metricsLine = el("div", "hint");
  actionPanel.append(generateBtn, extractBtn, statusLine, errorLine, retryBtn, metricsLine);

  side.append(toolPanel, promptPanel, countsPanel, pinPanel, guidePanel, guidancePanel, actionPanel);

  // --- actions ----------------------------------------------------------------
  async function runGenerate(req: GenerateRequest): Promise<void> {
    lastRequest = req;
    const token = gate.begin();
    statusLine.textContent = "generating…";
    errorLine.textContent = "";
    retryBtn.style.display = "none";
    try {
      const resp = await api.generate(req);
      if (!gate.isCurrent(token)) return; // superseded; discard
      state = applyGenerated(state, resp);
      history = appendEntry(
        history,
        makeEntry(req.conditions, resp.guidance, resp.layouts[0]),
      );
      statusLine.textContent = `generated (seed ${resp.guidance.seed})`;
      await showMetrics();
      renderStrip();
    } catch (e) {
      if (!gate.isCurrent(token)) return;
      statusLine.textContent = "";
      errorLine.textContent =
        e instanceof ApiError ? `${e.code}: ${e.detail}` : String(e);
      retryBtn.style.display = "inline-block";
    }
    refresh();
  }

  async function showMetrics(): Promise<void> {
    if (state.layout === null) return;
    const conditions = buildConditions(state);
    try {
      const m = await api.metrics(state.layout, conditions);
      const parts = Object.entries(m.metrics)
        .filter(([, v]) => v !== null)
        .map(([k, v]) => `${k}=${(v as number).toFixed(3)}`);
      metricsLine.textContent = parts.length
        ? `condition metrics: ${parts.join("  ")}`
        : "condition metrics: n/a (unconditional)";
    } catch {
      metricsLine.textContent = "";
    }
  }

  generateBtn.addEventListener("click", () => {
    void runGenerate(buildRequest(state, 1));
  });
  retryBtn.addEventListener("click", () => {
    if (lastRequest) void runGenerate(lastRequest);
  });
  extractBtn.addEventListener("click", async () => {
    if (state.layout === null) {
      errorLine.textContent = "generate a layout before extracting conditions";
      return;
    }
    try {
      const out = await api.extractConditions(state.layout);
      state = applyExtracted(state, out.conditions);
      errorLine.textContent = "";
      statusLine.textContent = "form populated from the displayed layout";
    } catch (e) {
      errorLine.textContent =
        e instanceof ApiError ? `${e.code}: ${e.detail}` : String(e);
    }
    refresh();
  });

  // --- canvas interaction ------------------------------------------------------
  let dragging: { x: number; y: number; panX: number; panY: number } | null = null;
  canvas.addEventListener("mousedown", (ev) => {
    if (tool === "pan") {
      dragging = { x: ev.clientX, y: ev.clientY, panX: state.panX, panY: state.panY };
    }
  });
  window.addEventListener("mousemove", (ev) => {
    if (dragging) {
      state = setPan(
        state,
        dragging.panX + (ev.clientX - dragging.x),
        dragging.panY + (ev.clientY - dragging.y),
      );
      refresh();
    }
  });
  window.addEventListener("mouseup", () => {
    dragging = null;
  });
  canvas.addEventListener("click", (ev) => {
    if (tool === "pan") return;
    const p = eventCanvasPoint(canvas, ev);
    if (tool === "select") {
      const hit = hitTest(core, state, p.x, p.y);
      if (hit !== null) state = toggleSelect(state, hit);
    } else {
      const axis = tool === "guide-x" ? "x" : "y";
      const boardPx =
        axis === "x" ? (p.x - state.panX) / state.zoom : (p.y - state.panY) / state.zoom;
      state = drawGuideline(core, state, axis, boardPx);
    }
    refresh();
  });
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    state = setZoom(state, state.zoom * (ev.deltaY < 0 ? 1.15 : 1 / 1.15));
    refresh();
  });

  // --- history strip ------------------------------------------------------------
  function renderStrip(): void {
    strip.textContent = "";
    history.forEach((entry, i) => {
      const cell = el("div", "cell");
      const thumb = el("canvas", "thumb");
      thumb.width = 72;
      thumb.height = 72;
      const tctx = thumb.getContext("2d")!;
      const scale = 72 / Math.max(core.schema.canvas_width, core.schema.canvas_height);
      drawScene(tctx, core, {
        ...initialState(),
        layout: entry.layout,
        zoom: scale,
      });
      thumb.title = new Date(entry.timestamp).toISOString();
      thumb.addEventListener("click", () => {
        state = { ...state, layout: entry.layout, selected: [] };
        refresh();
      });
      const replayBtn = el("button", "mini", `replay #${i}`);
      replayBtn.addEventListener("click", async () => {
        try {
          const resp = await api.generate(replayRequest(entry));
          const ok = replayMatches(entry, resp.layouts[0]);
          replayBtn.textContent = ok ? `#${i} ✓` : `#${i} ✗`;
          state = { ...state, layout: resp.layouts[0], selected: [] };
          refresh();
        } catch (e) {
          errorLine.textContent = String(e);
        }
      });
      cell.append(thumb, replayBtn);
      strip.appendChild(cell);
    });
  }

  // --- refresh -------------------------------------------------------------------
  function refresh(): void {
    drawScene(ctx, core, state);
    countRows.forEach((span, k) => {
      span.textContent = state.counts === null ? "—" : String(state.counts[k]);
    });
    if (promptBox.value !== state.promptText) promptBox.value = state.promptText;
    pinInfo.textContent =
      state.givenDesign === null
        ? state.selected.length
          ? `${state.selected.length} selected (not pinned yet)`
          : "no elements pinned"
        : `${state.givenDesign.elements.length} element(s) pinned`;
    const gl = [...state.overlay.committed, ...state.overlay.draft];
    guideInfo.textContent = gl.length
      ? gl.map((g) => `${g.axis}=${g.pos}`).join(", ")
      : "none";
    if (state.cue) {
      errorLine.textContent = state.cue;
    }
  }

  refresh();
}

void main();
