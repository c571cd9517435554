/** Wire types shared with the generation service. */

export type Axis = "x" | "y";

export interface GuidelineJson {
  axis: Axis;
  pos: number;
}

/**
 * One layout element in interchange form: one integer per schema attribute
 * (keyed by attribute name) plus a `valid` flag.
 */
export type ElementJson = { valid: boolean } & Record<string, number | boolean>;

export interface LayoutJson {
  schema?: string;
  elements: ElementJson[];
}

export interface ConditionSetJson {
  prompt: string[] | null;
  class_count: number[] | null;
  given_design: LayoutJson | null;
  guidelines: GuidelineJson[] | null;
}

export const CONDITION_NAMES = [
  "prompt",
  "class_count",
  "given_design",
  "guidelines",
] as const;

export type ConditionName = (typeof CONDITION_NAMES)[number];

export interface GuidanceJson {
  weights?: Record<string, number> | null;
  preset?: string | null;
  steps?: number | null;
  seed?: number;
}

export interface GenerateRequest {
  conditions: ConditionSetJson | null;
  guidance: GuidanceJson | null;
  count: number;
}

export interface EffectiveGuidance {
  weights: Record<string, number>;
  steps: number | null;
  seed: number;
}

export interface GenerateResponse {
  layouts: LayoutJson[];
  rasters: string[];
  guidance: EffectiveGuidance;
  count: number;
}

export interface LegendEntry {
  class_id: number;
  name: string;
  color: [number, number, number];
}

export interface SchemaJson {
  name: string;
  attributes: [string, number][];
  num_classes: number;
  element_capacity: number;
  canvas_width: number;
  canvas_height: number;
  class_attribute_index: number;
  class_names: string[];
}

export interface SchemaResponse {
  schema: SchemaJson;
  legend: LegendEntry[];
  models_loaded: boolean;
  dev_sampler: boolean;
}

export interface MetricsResponse {
  metrics: {
    c_usage: number | null;
    design_distance: number | null;
    g_usage: number | null;
  };
}

export interface SessionCreateResponse {
  session_id: string;
  history_limit: number;
}

export interface SessionStepResponse {
  layout: LayoutJson;
  raster: string;
  guidance: EffectiveGuidance;
  history_length: number;
}

export interface ApiErrorBody {
  error: string;
  detail: string;
}

/** Quantized axis resolution: the cardinality of the coordinate attributes. */
export function schemaResolution(schema: SchemaJson): number {
  for (const [name, cardinality] of schema.attributes) {
    if (name === "x_min") return cardinality;
  }
  throw new Error("schema has no x_min attribute");
}

/** Attribute names in schema order. */
export function attributeNames(schema: SchemaJson): string[] {
  return schema.attributes.map(([name]) => name);
}
