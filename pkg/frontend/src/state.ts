/**
 * Pure editor state and transitions.
 *
 * Every operation returns a new state; the DOM layer only dispatches these
 * and re-renders. Client-side validation is a superset of the server rules
 * for every field the editor can produce, so a request built from any
 * reachable state passes server validation.
 */
import { snapToResolution } from "./geometry.js";
import {
  Axis,
  CONDITION_NAMES,
  ConditionName,
  ConditionSetJson,
  EffectiveGuidance,
  ElementJson,
  GenerateRequest,
  GenerateResponse,
  GuidelineJson,
  LayoutJson,
  LegendEntry,
  SchemaJson,
  attributeNames,
  schemaResolution,
} from "./types.js";

export const MAX_COUNT = 64;

/** Immutable per-page context fetched once from GET /schema. */
export interface EditorCore {
  schema: SchemaJson;
  legend: LegendEntry[];
}

export interface OverlayState {
  /** Guidelines drawn since the last generation. */
  draft: GuidelineJson[];
  /** Guidelines already used by a generation (or loaded via extraction). */
  committed: GuidelineJson[];
}

export interface EditorState {
  layout: LayoutJson | null;
  overlay: OverlayState;
  /** Indices into layout.elements; always a subset of the valid elements. */
  selected: number[];
  givenDesign: LayoutJson | null;
  counts: number[] | null;
  promptText: string;
  weights: Record<string, number>;
  steps: number | null;
  seed: number;
  zoom: number;
  panX: number;
  panY: number;
  /** Transient message for ignored input (cleared by the next operation). */
  cue: string | null;
}

export function initialState(): EditorState {
  return {
    layout: null,
    overlay: { draft: [], committed: [] },
    selected: [],
    givenDesign: null,
    counts: null,
    promptText: "",
    weights: {},
    steps: null,
    seed: 0,
    zoom: 1,
    panX: 0,
    panY: 0,
    cue: null,
  };
}

function sameGuideline(a: GuidelineJson, b: GuidelineJson): boolean {
  return a.axis === b.axis && a.pos === b.pos;
}

/** Draft and committed guidelines merged, deduplicated, axis-then-position. */
export function overlayGuidelines(state: EditorState): GuidelineJson[] {
  const all: GuidelineJson[] = [];
  for (const g of [...state.overlay.committed, ...state.overlay.draft]) {
    if (!all.some((o) => sameGuideline(o, g))) all.push(g);
  }
  return all.sort((a, b) =>
    a.axis === b.axis ? a.pos - b.pos : a.axis < b.axis ? -1 : 1,
  );
}

/**
 * Add a guideline at a canvas pixel coordinate, snapped to the schema's
 * quantized resolution. Out-of-bounds clicks and duplicates change nothing
 * except the cue.
 */
export function drawGuideline(
  core: EditorCore,
  state: EditorState,
  axis: Axis,
  pixel: number,
): EditorState {
  const size =
    axis === "x" ? core.schema.canvas_width : core.schema.canvas_height;
  const pos = snapToResolution(pixel, size, schemaResolution(core.schema));
  if (pos === null) {
    return { ...state, cue: "guideline outside the canvas was ignored" };
  }
  const g: GuidelineJson = { axis, pos };
  const existing = [...state.overlay.committed, ...state.overlay.draft];
  if (existing.some((o) => sameGuideline(o, g))) {
    return { ...state, cue: null };
  }
  return {
    ...state,
    overlay: { ...state.overlay, draft: [...state.overlay.draft, g] },
    cue: null,
  };
}

/** Remove a guideline wherever it lives (draft or committed). */
export function removeGuideline(
  state: EditorState,
  g: GuidelineJson,
): EditorState {
  return {
    ...state,
    overlay: {
      draft: state.overlay.draft.filter((o) => !sameGuideline(o, g)),
      committed: state.overlay.committed.filter((o) => !sameGuideline(o, g)),
    },
    cue: null,
  };
}

export function clearGuidelines(state: EditorState): EditorState {
  return { ...state, overlay: { draft: [], committed: [] }, cue: null };
}

/** Toggle element selection; only valid in-range elements are selectable. */
export function toggleSelect(state: EditorState, index: number): EditorState {
  const layout = state.layout;
  if (
    layout === null ||
    index < 0 ||
    index >= layout.elements.length ||
    layout.elements[index].valid === false
  ) {
    return { ...state, cue: "selection must target a valid element" };
  }
  const selected = state.selected.includes(index)
    ? state.selected.filter((i) => i !== index)
    : [...state.selected, index].sort((a, b) => a - b);
  return { ...state, selected, cue: null };
}

export function clearSelection(state: EditorState): EditorState {
  return { ...state, selected: [], cue: null };
}

/**
 * Export the current selection as the given-design condition. An empty
 * selection clears the condition (null, never an empty layout). Pinning
 * everything *outside* a region is the same call with the complement
 * selected.
 */
export function pinSelection(
  core: EditorCore,
  state: EditorState,
): EditorState {
  if (state.layout === null || state.selected.length === 0) {
    return { ...state, givenDesign: null, cue: null };
  }
  const names = attributeNames(core.schema);
  const elements: ElementJson[] = state.selected.map((i) => {
    const src = state.layout!.elements[i];
    const rec: ElementJson = { valid: true };
    for (const name of names) rec[name] = src[name] as number;
    return rec;
  });
  return {
    ...state,
    givenDesign: { schema: core.schema.name, elements },
    cue: null,
  };
}

export function clearPin(state: EditorState): EditorState {
  return { ...state, givenDesign: null, cue: null };
}

/**
 * Adjust one class count by delta; counts never go below zero. Editing while
 * the condition is absent first materializes an all-zero count vector.
 */
export function editCounts(
  core: EditorCore,
  state: EditorState,
  classId: number,
  delta: number,
): EditorState {
  if (classId < 0 || classId >= core.schema.num_classes) {
    return { ...state, cue: "unknown class" };
  }
  const counts =
    state.counts !== null
      ? [...state.counts]
      : new Array<number>(core.schema.num_classes).fill(0);
  counts[classId] = Math.max(0, counts[classId] + Math.trunc(delta));
  return { ...state, counts, cue: null };
}

export function clearCounts(state: EditorState): EditorState {
  return { ...state, counts: null, cue: null };
}

/** Mirror the prompt textarea; the condition itself derives at build time. */
export function editPrompt(state: EditorState, text: string): EditorState {
  return { ...state, promptText: text, cue: null };
}

/** Sentences (non-empty lines); a cleared prompt is null, never "" or []. */
export function promptCondition(state: EditorState): string[] | null {
  const sentences = state.promptText
    .split("\n")
    .map((s) => s.trim())
    .filter((s) => s.length > 0);
  return sentences.length > 0 ? sentences : null;
}

/** Set a per-condition guidance weight; negative values are blocked. */
export function setWeight(
  state: EditorState,
  name: ConditionName,
  w: number,
): EditorState {
  if (!CONDITION_NAMES.includes(name)) {
    return { ...state, cue: `unknown condition ${name}` };
  }
  if (!Number.isFinite(w) || w < 0) {
    return { ...state, cue: "guidance weights must be nonnegative" };
  }
  return { ...state, weights: { ...state.weights, [name]: w }, cue: null };
}

/** Set the sampling step count; anything but null or an int >= 2 is blocked. */
export function setSteps(state: EditorState, steps: number | null): EditorState {
  if (steps !== null && (!Number.isInteger(steps) || steps < 2)) {
    return { ...state, cue: "steps must be an integer of at least 2" };
  }
  return { ...state, steps, cue: null };
}

export function setSeed(state: EditorState, seed: number): EditorState {
  if (!Number.isInteger(seed)) {
    return { ...state, cue: "seed must be an integer" };
  }
  return { ...state, seed, cue: null };
}

/** The ConditionSet the canvas currently encodes (null members = absent). */
export function buildConditions(state: EditorState): ConditionSetJson {
  const guidelines = overlayGuidelines(state);
  return {
    prompt: promptCondition(state),
    class_count: state.counts !== null ? [...state.counts] : null,
    given_design: state.givenDesign,
    guidelines: guidelines.length > 0 ? guidelines : null,
  };
}

/** Condition names present in a serialized ConditionSet (server's notion). */
export function presentNames(cs: ConditionSetJson): ConditionName[] {
  return CONDITION_NAMES.filter((name) => {
    const v = cs[name];
    return name === "guidelines"
      ? v !== null && (v as GuidelineJson[]).length > 0
      : v !== null;
  });
}

/**
 * The full generation request. Weights are emitted for exactly the present
 * conditions — the sampler requires one per present condition and rejects
 * one for an absent condition — defaulting to 0.0 where the form has no
 * explicit value. Count is clamped to the service bound.
 */
export function buildRequest(state: EditorState, count = 1): GenerateRequest {
  const conditions = buildConditions(state);
  const present = presentNames(conditions);
  const weights: Record<string, number> = {};
  for (const name of present) {
    weights[name] = state.weights[name] ?? 0.0;
  }
  return {
    conditions,
    guidance: { weights, steps: state.steps, seed: state.seed },
    count: Math.min(Math.max(1, Math.trunc(count)), MAX_COUNT),
  };
}

/**
 * Adopt a generation result: show the first layout, fold the draft overlay
 * into the committed set, and reset the (now stale) selection.
 */
export function applyGenerated(
  state: EditorState,
  resp: GenerateResponse,
): EditorState {
  return {
    ...state,
    layout: resp.layouts[0],
    overlay: { draft: [], committed: overlayGuidelines(state) },
    selected: [],
    cue: null,
  };
}

/** Populate the form from POST /extract-conditions output. */
export function applyExtracted(
  state: EditorState,
  cs: ConditionSetJson,
): EditorState {
  return {
    ...state,
    counts: cs.class_count !== null ? [...cs.class_count] : null,
    promptText: cs.prompt !== null ? cs.prompt.join("\n") : "",
    givenDesign: cs.given_design,
    overlay: { draft: [], committed: cs.guidelines !== null ? [...cs.guidelines] : [] },
    selected: [],
    cue: null,
  };
}

export function setZoom(state: EditorState, zoom: number): EditorState {
  return { ...state, zoom: Math.min(Math.max(zoom, 0.25), 8) };
}

export function setPan(state: EditorState, x: number, y: number): EditorState {
  return { ...state, panX: x, panY: y };
}

/**
 * Guard against stale responses: at most one generation is "current", and
 * only the response matching the newest token may be applied.
 */
export interface RequestGate {
  begin(): number;
  isCurrent(token: number): boolean;
}

export function createRequestGate(): RequestGate {
  let current = 0;
  return {
    begin: () => ++current,
    isCurrent: (token) => token === current,
  };
}

/**
 * The effective-guidance echo the server will return for a request this
 * client built: one weight per present condition (explicit or the 0.0
 * default), plus steps and seed.
 */
export function localEffectiveGuidance(
  req: GenerateRequest,
): EffectiveGuidance {
  const present = req.conditions ? presentNames(req.conditions) : [];
  const weights: Record<string, number> = {};
  for (const name of present) {
    weights[name] = req.guidance?.weights?.[name] ?? 0.0;
  }
  return {
    weights,
    steps: req.guidance?.steps ?? null,
    seed: req.guidance?.seed ?? 0,
  };
}
